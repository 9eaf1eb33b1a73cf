#include "qsdcert/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

Verdict judge_upper(double measured, double bound) {
    return measured <= bound + kSlackTolerance ? Verdict::Pass : Verdict::Fail;
}

BoundReport make_report(BoundKind kind, std::uint64_t t, double measured, double bound,
                        const CertificateSummary& cert) {
    BoundReport r;
    r.kind = kind;
    r.t = t;
    r.measured = measured;
    r.bound = bound;
    r.slack = bound - measured;
    r.verdict = judge_upper(measured, bound);
    r.cert = cert;
    return r;
}

BoundReport not_applicable(BoundKind kind, std::uint64_t t, double measured,
                           const CertificateSummary& cert) {
    BoundReport r;
    r.kind = kind;
    r.t = t;
    r.measured = measured;
    r.bound = std::numeric_limits<double>::infinity();
    r.slack = std::numeric_limits<double>::infinity();
    r.verdict = Verdict::NotApplicable;
    r.cert = cert;
    return r;
}

void require_matching(const ConditionedFlow& flow, const DobrushinCertificate& cert) {
    if (cert.kernel_hash != flow.kernel().hash())
        throw Error(ErrorCode::CertificateMismatch, "certificate was computed for another kernel");
    if (!flow.has_phi())
        throw Error(ErrorCode::InvalidSpec, "bound checks need the right eigenfunction in the flow");
}

double mu_phi(const ConditionedFlow& flow, const Distribution& mu) {
    return dot(mu.values(), flow.phi());
}

// lambda^-t mu P^t, renormalizing by lambda at every step.
Vector scaled_evolution(const ConditionedFlow& flow, const Distribution& mu, std::uint64_t t) {
    Vector v(mu.values().begin(), mu.values().end());
    for (std::uint64_t s = 0; s < t; ++s) {
        v = left_multiply(v, flow.kernel().p());
        for (double& x : v) x /= flow.lambda();
    }
    return v;
}

Vector normalized(std::span<const double> v) {
    const double s = sum(v);
    Vector out(v.begin(), v.end());
    for (double& x : out) x /= s;
    return out;
}

// Rows of P^t rescaled by lambda^-t so repeated products cannot underflow;
// the checks only use row-normalized entries.
Matrix scaled_power(const ConditionedFlow& flow, std::uint64_t t) {
    Matrix m = power(flow.kernel().p(), t);
    const double scale = std::pow(flow.lambda(), -static_cast<double>(t));
    if (std::isfinite(scale))
        for (double& x : m.data()) x *= scale;
    return m;
}

double min_survival_over(const ConditionedFlow& flow, std::uint64_t h) {
    const Vector rs = row_sums(power(flow.kernel().p(), h));
    return *std::min_element(rs.begin(), rs.end());
}

}  // namespace

std::string_view to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::LInftyPF: return "LInftyPF";
        case BoundKind::KillingProb: return "KillingProb";
        case BoundKind::ConditionedLInfty: return "ConditionedLInfty";
        case BoundKind::UniformConditioned: return "UniformConditioned";
        case BoundKind::ComparisonUpper: return "ComparisonUpper";
        case BoundKind::ComparisonLower: return "ComparisonLower";
        case BoundKind::LpError: return "LpError";
        case BoundKind::QProcessLInfty: return "QProcessLInfty";
    }
    return "Unknown";
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::NotApplicable: return "NOT_APPLICABLE";
    }
    return "UNKNOWN";
}

CertificateSummary summarize(const DobrushinCertificate& cert) {
    return {cert.t0, cert.c0, cert.C2, cert.c3, cert.kernel_hash};
}

double osc_pi(const Distribution& mu, const Distribution& pi) {
    if (mu.size() != pi.size()) throw Error(ErrorCode::DimensionMismatch, "osc_pi: length mismatch");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        const double r = mu[x] / pi[x];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return hi - lo;
}

double contraction_factor(const CertificateSummary& cert, std::uint64_t steps) {
    return std::pow(1.0 - cert.c0, static_cast<double>(steps / cert.t0));
}

namespace detail {

BoundReport linfty_pf_from(const ConditionedFlow& flow, const Distribution& mu,
                           std::span<const double> scaled, std::uint64_t t,
                           const CertificateSummary& cert) {
    const double target = mu_phi(flow, mu);
    double measured = 0.0;
    for (std::size_t x = 0; x < scaled.size(); ++x)
        measured = std::max(measured, std::fabs(scaled[x] / flow.pi()[x] - target));
    const double bound = contraction_factor(cert, t) * osc_pi(mu, flow.pi());
    return make_report(BoundKind::LInftyPF, t, measured, bound, cert);
}

BoundReport killing_from(const ConditionedFlow& flow, const Distribution& mu,
                         std::span<const double> scaled, std::uint64_t t,
                         const CertificateSummary& cert) {
    const double measured = std::fabs(sum(scaled) - mu_phi(flow, mu));
    const double bound = contraction_factor(cert, t) * osc_pi(mu, flow.pi());
    return make_report(BoundKind::KillingProb, t, measured, bound, cert);
}

BoundReport conditioned_from(const ConditionedFlow& flow, const Distribution& mu,
                             std::span<const double> law, std::uint64_t t,
                             const CertificateSummary& cert) {
    double measured = 0.0;
    for (std::size_t x = 0; x < law.size(); ++x)
        measured = std::max(measured, std::fabs(law[x] / flow.pi()[x] - 1.0));
    const double e = contraction_factor(cert, t) * osc_pi(mu, flow.pi());
    const double den = mu_phi(flow, mu) - e;
    if (!(den > 0.0)) return not_applicable(BoundKind::ConditionedLInfty, t, measured, cert);
    return make_report(BoundKind::ConditionedLInfty, t, measured, 2.0 * e / den, cert);
}

BoundReport uniform_from(const ConditionedFlow& flow, const Matrix& pt, std::uint64_t t,
                         const CertificateSummary& cert) {
    const std::size_t n = flow.n();
    double measured = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        const double mass = sum(pt.row(x));
        for (std::size_t y = 0; y < n; ++y)
            measured = std::max(measured, std::fabs(pt(x, y) / mass / flow.pi()[y] - 1.0));
    }
    if (t < 4 * cert.t0) return not_applicable(BoundKind::UniformConditioned, t, measured, cert);
    const double e = cert.C2 * contraction_factor(cert, t - 4 * cert.t0);
    const double den = cert.c3 - e;
    if (!(den > 0.0)) return not_applicable(BoundKind::UniformConditioned, t, measured, cert);
    return make_report(BoundKind::UniformConditioned, t, measured, 2.0 * e / den, cert);
}

std::pair<BoundReport, BoundReport> comparison_from(const ConditionedFlow& flow, const Matrix& pt,
                                                    std::uint64_t t, double eps,
                                                    const CertificateSummary& cert) {
    const std::size_t n = flow.n();
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    const double upper = cert.C2 / eps;
    bool upper_ok = true;
    bool lower_ok = true;
    for (std::size_t x = 0; x < n; ++x) {
        const double mass = sum(pt.row(x));
        for (std::size_t y = 0; y < n; ++y) {
            const double law = pt(x, y) / mass;
            const double pi = flow.pi()[y];
            hi = std::max(hi, law / pi);
            lo = std::min(lo, law / pi);
            if (law > upper * pi + 1e-12) upper_ok = false;
            if (law < cert.c3 * pi - 1e-12) lower_ok = false;
        }
    }
    if (t < 2 * cert.t0)
        return {not_applicable(BoundKind::ComparisonUpper, t, hi, cert),
                not_applicable(BoundKind::ComparisonLower, t, lo, cert)};
    BoundReport up = make_report(BoundKind::ComparisonUpper, t, hi, upper, cert);
    up.verdict = upper_ok ? Verdict::Pass : Verdict::Fail;
    BoundReport down = make_report(BoundKind::ComparisonLower, t, lo, cert.c3, cert);
    down.slack = lo - cert.c3;
    down.verdict = lower_ok ? Verdict::Pass : Verdict::Fail;
    return {up, down};
}

double lp_from(const Distribution& pi, std::span<const double> law, double p) {
    if (!(p >= 1.0)) throw Error(ErrorCode::InvalidSpec, "lp_error needs p >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t x = 0; x < law.size(); ++x)
            m = std::max(m, std::fabs(law[x] / pi[x] - 1.0));
        return m;
    }
    long double acc = 0.0L;
    for (std::size_t x = 0; x < law.size(); ++x)
        acc += std::pow(std::fabs(static_cast<long double>(law[x]) / pi[x] - 1.0L),
                        static_cast<long double>(p)) *
               pi[x];
    return static_cast<double>(std::pow(acc, 1.0L / p));
}

}  // namespace detail

BoundReport linfty_pf_check(const ConditionedFlow& flow, const Distribution& mu, std::uint64_t t,
                            const DobrushinCertificate& cert) {
    require_matching(flow, cert);
    const Vector scaled = scaled_evolution(flow, mu, t);
    return detail::linfty_pf_from(flow, mu, scaled, t, summarize(cert));
}

BoundReport killing_prob_check(const ConditionedFlow& flow, const Distribution& mu,
                               std::uint64_t t, const DobrushinCertificate& cert) {
    require_matching(flow, cert);
    const Vector scaled = scaled_evolution(flow, mu, t);
    return detail::killing_from(flow, mu, scaled, t, summarize(cert));
}

BoundReport conditioned_linfty_check(const ConditionedFlow& flow, const Distribution& mu,
                                     std::uint64_t t, const DobrushinCertificate& cert) {
    require_matching(flow, cert);
    const Vector law = normalized(scaled_evolution(flow, mu, t));
    return detail::conditioned_from(flow, mu, law, t, summarize(cert));
}

BoundReport uniform_conditioned_check(const ConditionedFlow& flow, std::uint64_t t,
                                      const DobrushinCertificate& cert) {
    require_matching(flow, cert);
    return detail::uniform_from(flow, scaled_power(flow, t), t, summarize(cert));
}

std::pair<BoundReport, BoundReport> comparison_check(const ConditionedFlow& flow, std::uint64_t t,
                                                     const DobrushinCertificate& cert) {
    require_matching(flow, cert);
    const double eps = min_survival_over(flow, cert.t0);
    return detail::comparison_from(flow, scaled_power(flow, t), t, eps, summarize(cert));
}

double lp_error(const ConditionedFlow& flow, const Distribution& mu, std::uint64_t t, double p) {
    const Distribution law = conditioned_evolve(flow.kernel(), mu, t);
    return detail::lp_from(flow.pi(), law.values(), p);
}

SweepResult certify_sweep(const ConditionedFlow& flow, const DobrushinCertificate& cert,
                          const SweepOptions& options) {
    require_matching(flow, cert);
    const CertificateSummary summary = summarize(cert);
    const std::size_t n = flow.n();

    std::vector<Distribution> starts = options.starts;
    if (starts.empty()) {
        for (std::size_t x = 0; x < n; ++x) starts.push_back(Distribution::dirac(n, x));
        starts.push_back(flow.pi());
        starts.push_back(Distribution::uniform(n));
    }

    SweepResult result;
    std::vector<Vector> scaled;
    scaled.reserve(starts.size());
    for (const Distribution& mu : starts) scaled.emplace_back(mu.values().begin(), mu.values().end());
    std::vector<double> previous_linfty(starts.size(), std::numeric_limits<double>::infinity());
    std::vector<char> became_applicable(starts.size(), 0);

    const std::uint64_t stride = std::max<std::uint64_t>(1, options.matrix_stride);
    const Matrix step_power = stride == 1 ? flow.kernel().p() : power(flow.kernel().p(), stride);
    const double step_scale = std::pow(flow.lambda(), -static_cast<double>(stride));
    Matrix pt = Matrix::identity(n);
    const double eps = min_survival_over(flow, cert.t0);

    constexpr double inf = std::numeric_limits<double>::infinity();

    for (std::uint64_t t = 0; t <= options.t_max; ++t) {
        if (t > 0) {
            for (Vector& v : scaled) {
                v = left_multiply(v, flow.kernel().p());
                for (double& x : v) x /= flow.lambda();
            }
        }
        for (std::size_t s = 0; s < starts.size(); ++s) {
            const Distribution& mu = starts[s];
            BoundReport pf = detail::linfty_pf_from(flow, mu, scaled[s], t, summary);
            if (std::isfinite(previous_linfty[s]))
                result.worst_linfty_increase =
                    std::max(result.worst_linfty_increase, pf.measured - previous_linfty[s]);
            previous_linfty[s] = pf.measured;
            result.reports.push_back(pf);
            result.reports.push_back(detail::killing_from(flow, mu, scaled[s], t, summary));

            const Vector law = normalized(scaled[s]);
            BoundReport cond = detail::conditioned_from(flow, mu, law, t, summary);
            if (cond.verdict != Verdict::NotApplicable) became_applicable[s] = 1;
            else if (became_applicable[s]) result.applicability_monotone = false;
            result.reports.push_back(cond);

            const double l1 = detail::lp_from(flow.pi(), law, 1.0);
            const double linf = detail::lp_from(flow.pi(), law, inf);
            double prev = l1;
            for (double p : options.lp_orders) {
                const double lp = detail::lp_from(flow.pi(), law, p);
                const double interp = std::pow(l1, 1.0 / p) * std::pow(linf, 1.0 - 1.0 / p);
                result.worst_interpolation_gap = std::max(result.worst_interpolation_gap, lp - interp);
                result.worst_lp_monotonicity = std::min(result.worst_lp_monotonicity, lp - prev);
                prev = lp;
            }
            result.worst_lp_monotonicity = std::min(result.worst_lp_monotonicity, linf - prev);
        }

        if (t % stride == 0) {
            if (t > 0) {
                pt = multiply(pt, step_power);
                if (std::isfinite(step_scale))
                    for (double& x : pt.data()) x *= step_scale;
            }
            result.reports.push_back(detail::uniform_from(flow, pt, t, summary));
            auto [up, down] = detail::comparison_from(flow, pt, t, eps, summary);
            result.reports.push_back(up);
            result.reports.push_back(down);
        }
    }

    result.min_slack = inf;
    for (const BoundReport& r : result.reports) {
        switch (r.verdict) {
            case Verdict::Pass: ++result.pass; break;
            case Verdict::Fail: ++result.fail; break;
            case Verdict::NotApplicable: ++result.not_applicable; break;
        }
        if (r.verdict != Verdict::NotApplicable) result.min_slack = std::min(result.min_slack, r.slack);
    }
    return result;
}

std::string reports_csv(std::span<const BoundReport> reports, BoundKind kind,
                        std::uint64_t kernel_hash, std::size_t n) {
    // One row per t: the applicable report with the smallest slack, or the
    // not-applicable marker when no start was applicable.
    std::map<std::uint64_t, BoundReport> worst;
    for (const BoundReport& r : reports) {
        if (r.kind != kind) continue;
        auto it = worst.find(r.t);
        if (it == worst.end()) {
            worst.emplace(r.t, r);
            continue;
        }
        BoundReport& w = it->second;
        const bool r_app = r.verdict != Verdict::NotApplicable;
        const bool w_app = w.verdict != Verdict::NotApplicable;
        if ((r_app && !w_app) || (r_app == w_app && r.slack < w.slack) ||
            (r.verdict == Verdict::Fail && w.verdict != Verdict::Fail))
            w = r;
    }
    std::ostringstream out;
    out.precision(17);
    out << "# kind=" << to_string(kind) << " n=" << n << " kernel_hash=" << std::hex << kernel_hash
        << std::dec << "\n";
    out << "t,measured,bound,slack,verdict\n";
    for (const auto& [t, r] : worst)
        out << t << ',' << r.measured << ',' << r.bound << ',' << r.slack << ',' << to_string(r.verdict)
            << '\n';
    return out.str();
}

}  // namespace qsdcert
