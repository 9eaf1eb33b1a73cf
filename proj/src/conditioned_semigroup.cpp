#include "qsdcert/conditioned_semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qsdcert/error.hpp"
#include "qsdcert/rng.hpp"

namespace qsdcert {

namespace {

constexpr double kSurvivalFloor = 1e-300;
constexpr std::size_t kAuditDepth = 10;

Distribution random_probability(Stream& rng, std::size_t n) {
    Vector w(n);
    for (double& x : w) x = rng.uniform();
    return Distribution::normalized(std::move(w));
}

}  // namespace

ConditionedFlow::ConditionedFlow(SubMarkovKernel kernel, Distribution pi, Vector phi)
    : kernel_(std::move(kernel)), pi_(std::move(pi)), phi_(std::move(phi)) {
    if (pi_.size() != kernel_.n())
        throw Error(ErrorCode::DimensionMismatch, "flow: pi has the wrong length");
    for (std::size_t y = 0; y < pi_.size(); ++y)
        if (!(pi_[y] > 0.0))
            throw Error(ErrorCode::ZeroPiEntry, "flow needs full-support pi", {y});
    if (!phi_.empty() && phi_.size() != kernel_.n())
        throw Error(ErrorCode::DimensionMismatch, "flow: phi has the wrong length");
    if (const double r = qsd_residual(kernel_, pi_); r > 1e-9)
        throw Error(ErrorCode::NotQsd, "||pi P - lambda pi||_1 = " + std::to_string(r));
    lambda_ = dot(pi_.values(), kernel_.row_sums());
}

ConditionedFlow ConditionedFlow::from_qsd(const SubMarkovKernel& kernel, const QsdSolution& qsd) {
    return ConditionedFlow(kernel, qsd.pi, qsd.phi);
}

ConditionedFlow ConditionedFlow::at_horizon(std::uint64_t t0) const {
    if (t0 == 1) return *this;
    return ConditionedFlow(kernel_power(kernel_, t0), pi_, phi_);
}

Distribution conditioned_evolve(const SubMarkovKernel& k, const Distribution& mu, std::uint64_t t) {
    if (mu.size() != k.n())
        throw Error(ErrorCode::DimensionMismatch, "conditioned_evolve: length mismatch");
    Vector v(mu.values().begin(), mu.values().end());
    double s0 = sum(v);
    if (!(s0 > 0.0)) throw Error(ErrorCode::Extinct, "initial mass is zero", {0});
    for (double& x : v) x /= s0;
    double survival = 1.0;
    for (std::uint64_t step = 0; step < t; ++step) {
        Vector next = left_multiply(v, k.p());
        const double s = sum(next);
        if (!(s > 0.0) || survival * s < kSurvivalFloor)
            throw Error(ErrorCode::Extinct,
                        "survival mass below 1e-300 after t = " + std::to_string(step + 1) +
                            "; last safe t = " + std::to_string(step),
                        {static_cast<std::size_t>(step)});
        survival *= s;
        for (double& x : next) x /= s;
        v = std::move(next);
    }
    return Distribution(std::move(v));
}

Vector t_operator(const ConditionedFlow& flow, std::span<const double> f) {
    const std::size_t n = flow.n();
    if (f.size() != n) throw Error(ErrorCode::DimensionMismatch, "t_operator: length mismatch");
    Vector weighted(n);
    for (std::size_t x = 0; x < n; ++x) weighted[x] = f[x] * flow.pi()[x];
    const Vector num = left_multiply(weighted, flow.kernel().p());
    const Vector den = left_multiply(flow.pi().values(), flow.kernel().p());
    Vector out(n);
    for (std::size_t y = 0; y < n; ++y) out[y] = num[y] / den[y];
    return out;
}

Distribution t_dagger(const ConditionedFlow& flow, const Distribution& mu) {
    const std::size_t n = flow.n();
    if (mu.size() != n) throw Error(ErrorCode::DimensionMismatch, "t_dagger: length mismatch");
    Vector density(n);
    for (std::size_t y = 0; y < n; ++y) density[y] = mu[y] / flow.pi()[y];
    const Vector pd = right_multiply(flow.kernel().p(), density);
    Vector out(n);
    for (std::size_t x = 0; x < n; ++x) out[x] = pd[x] * flow.pi()[x] / flow.lambda();
    // Rounding can push the total a few ulps past one.
    const double m = sum(out);
    if (m > 1.0) for (double& x : out) x /= m;
    return Distribution(std::move(out));
}

ReverseMinorization reverse_minorization(const ConditionedFlow& flow, std::uint64_t t0) {
    const ConditionedFlow h = flow.at_horizon(t0);
    const SubMarkovKernel r = reverse_kernel(h.kernel(), h.pi());
    const std::size_t n = flow.n();
    Vector col_min(n, std::numeric_limits<double>::infinity());
    for (std::size_t y = 0; y < n; ++y) {
        const double mass = r.row_sum(y);
        for (std::size_t x = 0; x < n; ++x) col_min[x] = std::min(col_min[x], r(y, x) / mass);
    }
    const double total = sum(col_min);
    ReverseMinorization out;
    if (!(total > 0.0)) {
        out.nu = Distribution::uniform(n);
        return out;
    }
    out.nu = Distribution::normalized(col_min);
    out.c0 = minorization_coefficient(r, out.nu);
    return out;
}

Distribution stationary_of_t_dagger(const ConditionedFlow& flow, double tol, std::uint64_t t0) {
    const ReverseMinorization m = reverse_minorization(flow, t0);
    if (!(m.c0 > 0.0))
        throw Error(ErrorCode::NoContraction,
                    "reverse kernel has no minorization at horizon " + std::to_string(t0));
    const ConditionedFlow h = flow.at_horizon(t0);
    Distribution beta = flow.pi();
    for (std::size_t iter = 0; iter < 10'000'000; ++iter) {
        Distribution next = t_dagger(h, beta);
        const double step = l1_distance(next.values(), beta.values());
        beta = std::move(next);
        if (step <= tol * m.c0) return beta;
    }
    throw Error(ErrorCode::NoConvergence, "Banach iteration for T^dag did not settle");
}

double total_variation(std::span<const double> a, std::span<const double> b) {
    return 0.5 * l1_distance(a, b);
}

ContractionAudit contraction_audit(const ConditionedFlow& flow, std::uint64_t t0, double c0,
                                   std::size_t trials, std::uint64_t seed) {
    const ConditionedFlow h = flow.at_horizon(t0);
    ContractionAudit audit;
    audit.seed = seed;
    audit.t0 = t0;
    audit.c0 = c0;
    audit.rows.resize(trials * kAuditDepth);
    const auto count = static_cast<std::ptrdiff_t>(trials);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t trial = 0; trial < count; ++trial) {
        Stream rng(seed, {static_cast<std::uint64_t>(trial)});
        Distribution mu1 = random_probability(rng, flow.n());
        Distribution mu2 = random_probability(rng, flow.n());
        const double tv0 = total_variation(mu1.values(), mu2.values());
        for (std::size_t step = 1; step <= kAuditDepth; ++step) {
            mu1 = t_dagger(h, mu1);
            mu2 = t_dagger(h, mu2);
            AuditRow& row = audit.rows[trial * kAuditDepth + step - 1];
            row.trial = static_cast<std::size_t>(trial);
            row.n = step;
            row.tv_before = tv0;
            row.tv_after = total_variation(mu1.values(), mu2.values());
            row.bound = std::pow(1.0 - c0, static_cast<double>(step)) * tv0;
            row.ratio = row.bound > 0.0 ? row.tv_after / row.bound : 0.0;
        }
    }

    for (const AuditRow& row : audit.rows) {
        audit.worst_ratio = std::max(audit.worst_ratio, row.ratio);
        if (row.tv_after > row.bound + 1e-12)
            throw Error(ErrorCode::ContractionViolated,
                        "trial " + std::to_string(row.trial) + " (seed " + std::to_string(seed) +
                            "), n = " + std::to_string(row.n) + ": TV " +
                            std::to_string(row.tv_after) + " > bound " + std::to_string(row.bound),
                        {row.trial, row.n});
    }
    return audit;
}

std::string audit_csv(const ContractionAudit& audit) {
    std::ostringstream out;
    out.precision(17);
    out << "# seed=" << audit.seed << " t0=" << audit.t0 << " c0=" << audit.c0
        << " worst_ratio=" << audit.worst_ratio << "\n";
    out << "trial,n,tv_before,tv_after,bound,ratio\n";
    for (const AuditRow& r : audit.rows)
        out << r.trial << ',' << r.n << ',' << r.tv_before << ',' << r.tv_after << ',' << r.bound
            << ',' << r.ratio << '\n';
    return out.str();
}

}  // namespace qsdcert
