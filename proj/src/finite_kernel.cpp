#include "qsdcert/finite_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

std::string entry_label(std::size_t i, std::size_t j) {
    return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

// Breadth-first reachability from state 0 along the support graph or its
// transpose.
bool reaches_all(const Matrix& p, bool transposed) {
    const std::size_t n = p.rows();
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            const double w = transposed ? p(v, u) : p(u, v);
            if (w > 0.0 && !seen[v]) {
                seen[v] = 1;
                ++count;
                queue.push_back(v);
            }
        }
    }
    return count == n;
}

Vector normalize(Vector v) {
    const double s = sum(v);
    for (double& x : v) x /= s;
    return v;
}

void require_same_size(const SubMarkovKernel& k, const Distribution& d, const char* what) {
    if (d.size() != k.n())
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": distribution has " + std::to_string(d.size()) +
                        " entries, kernel has " + std::to_string(k.n()));
}

}  // namespace

Distribution::Distribution(Vector w) : w_(std::move(w)) {
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (!(w_[i] >= 0.0) || !std::isfinite(w_[i]))
            throw Error(ErrorCode::InvalidDistribution,
                        "entry " + std::to_string(i) + " is negative or not finite", {i});
    }
    if (mass() > 1.0 + kMassSlack)
        throw Error(ErrorCode::InvalidDistribution, "total mass exceeds one");
}

Distribution Distribution::uniform(std::size_t n) {
    return Distribution(Vector(n, 1.0 / static_cast<double>(n)));
}

Distribution Distribution::dirac(std::size_t n, std::size_t x) {
    Vector w(n, 0.0);
    w.at(x) = 1.0;
    return Distribution(std::move(w));
}

Distribution Distribution::normalized(Vector w) {
    for (std::size_t i = 0; i < w.size(); ++i)
        if (!(w[i] >= 0.0))
            throw Error(ErrorCode::InvalidDistribution, "negative weight", {i});
    const double s = sum(w);
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidDistribution, "zero total weight");
    for (double& x : w) x /= s;
    return Distribution(std::move(w));
}

bool Distribution::is_probability(double tol) const {
    return std::fabs(mass() - 1.0) <= tol;
}

bool Distribution::strictly_positive() const {
    return std::all_of(w_.begin(), w_.end(), [](double x) { return x > 0.0; });
}

SubMarkovKernel::SubMarkovKernel(Matrix p, std::uint64_t t_unit)
    : p_(std::move(p)), t_unit_(t_unit), hash_(content_hash(p_)), row_sums_(qsdcert::row_sums(p_)) {}

SubMarkovKernel validate_kernel(Matrix raw, std::uint64_t t_unit) {
    if (!raw.square() || raw.rows() == 0)
        throw Error(ErrorCode::NotSquare, std::to_string(raw.rows()) + "x" +
                                              std::to_string(raw.cols()) + " matrix");
    if (t_unit == 0) throw Error(ErrorCode::InvalidSpec, "t_unit must be positive");
    const std::size_t n = raw.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = raw(i, j);
            if (!(v >= 0.0) || !std::isfinite(v))
                throw Error(ErrorCode::NegativeEntry, "entry " + entry_label(i, j), {i, j});
        }
        const double s = sum(raw.row(i));
        if (s > 1.0 + kMassSlack)
            throw Error(ErrorCode::RowSumExceedsOne,
                        "row " + std::to_string(i) + " sums to " + std::to_string(s), {i});
        if (s == 0.0) throw Error(ErrorCode::DeadRow, "row " + std::to_string(i), {i});
    }
    return SubMarkovKernel(std::move(raw), t_unit);
}

SubMarkovKernel kernel_power(const SubMarkovKernel& k, std::uint64_t t, Execution exec) {
    if (t == 0) throw Error(ErrorCode::InvalidSpec, "kernel_power needs t >= 1");
    return validate_kernel(power(k.p(), t, exec), k.t_unit() * t);
}

bool is_irreducible(const SubMarkovKernel& k) {
    return reaches_all(k.p(), false) && reaches_all(k.p(), true);
}

std::size_t period(const SubMarkovKernel& k) {
    const std::size_t n = k.n();
    constexpr auto unseen = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> level(n, unseen);
    std::deque<std::size_t> queue{0};
    level[0] = 0;
    std::size_t g = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            if (!(k(u, v) > 0.0)) continue;
            if (level[v] == unseen) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                const auto diff = static_cast<long long>(level[u]) + 1 - static_cast<long long>(level[v]);
                g = std::gcd(g, static_cast<std::size_t>(std::llabs(diff)));
            }
        }
    }
    return g == 0 ? 1 : g;
}

double qsd_residual(const SubMarkovKernel& k, const Distribution& pi) {
    require_same_size(k, pi, "qsd_residual");
    const Vector next = left_multiply(pi.values(), k.p());
    const double lambda = dot(pi.values(), k.row_sums());
    long double acc = 0.0L;
    for (std::size_t i = 0; i < next.size(); ++i)
        acc += std::fabs(static_cast<long double>(next[i]) - lambda * static_cast<long double>(pi[i]));
    return static_cast<double>(acc);
}

QsdSolution compute_qsd(const SubMarkovKernel& k, double tol, std::size_t max_iter,
                        std::size_t polish_steps) {
    if (!is_irreducible(k))
        throw Error(ErrorCode::NotIrreducible, "support graph is not strongly connected");
    if (const std::size_t d = period(k); d > 1)
        throw Error(ErrorCode::NoConvergence,
                    "kernel is periodic with period " + std::to_string(d) +
                        "; conditioned power iteration oscillates");

    const std::size_t n = k.n();
    QsdSolution sol;

    // Left eigenvector.
    Vector mu(n, 1.0 / static_cast<double>(n));
    std::size_t iter = 0;
    bool converged = false;
    while (iter < max_iter) {
        Vector next = normalize(left_multiply(mu, k.p()));
        const double diff = l1_distance(next, mu);
        mu = std::move(next);
        ++iter;
        if (diff <= tol) {
            double best = diff;
            for (std::size_t s = 0; s < polish_steps && best > 0.0; ++s) {
                Vector more = normalize(left_multiply(mu, k.p()));
                const double d = l1_distance(more, mu);
                mu = std::move(more);
                ++iter;
                if (!(d < best)) break;
                best = d;
            }
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::NoConvergence,
                    "left iteration did not reach tolerance in " + std::to_string(max_iter) +
                        " iterations");

    sol.pi = Distribution(std::move(mu));
    sol.lambda = dot(sol.pi.values(), k.row_sums());

    // Right eigenvector, renormalized so that pi(h) = 1 at every step.
    Vector h(n, 1.0);
    converged = false;
    std::size_t right_iter = 0;
    while (right_iter < max_iter) {
        Vector next = right_multiply(k.p(), h);
        const double scale = dot(sol.pi.values(), next);
        for (double& x : next) x /= scale;
        const double diff = sup_distance(next, h);
        h = std::move(next);
        ++right_iter;
        if (diff <= tol) {
            double best = diff;
            for (std::size_t s = 0; s < polish_steps && best > 0.0; ++s) {
                Vector more = right_multiply(k.p(), h);
                const double sc = dot(sol.pi.values(), more);
                for (double& x : more) x /= sc;
                const double d = sup_distance(more, h);
                h = std::move(more);
                ++right_iter;
                if (!(d < best)) break;
                best = d;
            }
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::NoConvergence, "right iteration did not reach tolerance");

    sol.phi = std::move(h);
    sol.iterations = iter + right_iter;

    const Vector ph = right_multiply(k.p(), sol.phi);
    double right_res = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        right_res = std::max(right_res, std::fabs(ph[i] - sol.lambda * sol.phi[i]));
    sol.residual = std::max(qsd_residual(k, sol.pi), right_res);
    return sol;
}

SubMarkovKernel reverse_kernel(const SubMarkovKernel& k, const Distribution& pi, double qsd_tol) {
    require_same_size(k, pi, "reverse_kernel");
    for (std::size_t y = 0; y < k.n(); ++y)
        if (!(pi[y] > 0.0))
            throw Error(ErrorCode::ZeroPiEntry, "pi[" + std::to_string(y) + "] = 0", {y});
    if (const double r = qsd_residual(k, pi); r > qsd_tol)
        throw Error(ErrorCode::NotQsd, "||pi P - lambda pi||_1 = " + std::to_string(r));
    const std::size_t n = k.n();
    Matrix r(n, n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) r(y, x) = pi[x] * k(x, y) / pi[y];
    return validate_kernel(std::move(r), k.t_unit());
}

AdjointKernel adjoint_kernel(const SubMarkovKernel& k) {
    const Vector cols = column_sums(k.p());
    const double a = *std::max_element(cols.begin(), cols.end());
    const std::size_t n = k.n();
    Matrix t(n, n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) t(y, x) = k(x, y) / a;
    return {a, validate_kernel(std::move(t), k.t_unit())};
}

DobrushinCertificate dobrushin_constants(const SubMarkovKernel& k, const Distribution& pi,
                                         std::uint64_t t0) {
    require_same_size(k, pi, "dobrushin_constants");
    if (t0 == 0) throw Error(ErrorCode::InvalidSpec, "t0 must be positive");
    if (const double r = qsd_residual(k, pi); r > 1e-9)
        throw Error(ErrorCode::NotQsd, "||pi P - lambda pi||_1 = " + std::to_string(r));
    const Matrix q = power(k.p(), t0);
    const auto entries = q.data();
    const auto [min_it, max_it] = std::minmax_element(entries.begin(), entries.end());
    const double q_min = *min_it;
    const double q_max = *max_it;
    if (!(q_min > 0.0)) {
        const auto flat = static_cast<std::size_t>(min_it - entries.begin());
        throw Error(ErrorCode::NotPrimitiveAtHorizon,
                    "P^" + std::to_string(t0) + " has a zero entry " +
                        entry_label(flat / k.n(), flat % k.n()),
                    {flat / k.n(), flat % k.n()});
    }
    const Vector cols = column_sums(q);
    const Vector rows = row_sums(q);
    const double col_max = *std::max_element(cols.begin(), cols.end());
    const double row_max = *std::max_element(rows.begin(), rows.end());
    const double pi_max = *std::max_element(pi.values().begin(), pi.values().end());
    const double n = static_cast<double>(k.n());

    DobrushinCertificate cert;
    cert.t0 = t0;
    cert.c0 = q_min / (pi_max * col_max);
    cert.C2 = q_max * col_max / q_min;
    cert.c3 = n * q_min * q_min / (pi_max * col_max * row_max);
    cert.nu = Distribution::uniform(k.n());
    cert.kernel_hash = k.hash();
    return cert;
}

std::uint64_t minimal_positive_horizon(const SubMarkovKernel& k, std::uint64_t max_t) {
    const std::size_t n = k.n();
    const std::size_t words = (n + 63) / 64;
    using Bits = std::vector<std::uint64_t>;
    std::vector<Bits> base(n, Bits(words, 0));
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            if (k(x, y) > 0.0) base[x][y / 64] |= std::uint64_t{1} << (y % 64);

    auto full = [&](const Bits& b) {
        for (std::size_t w = 0; w < words; ++w) {
            const std::size_t bits = (w + 1 == words && n % 64 != 0) ? n % 64 : 64;
            const std::uint64_t mask = bits == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
            if ((b[w] & mask) != mask) return false;
        }
        return true;
    };

    std::vector<Bits> reach = base;
    for (std::uint64_t t = 1; t <= max_t; ++t) {
        if (std::all_of(reach.begin(), reach.end(), full)) return t;
        std::vector<Bits> next(n, Bits(words, 0));
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t z = 0; z < n; ++z)
                if ((reach[x][z / 64] >> (z % 64)) & 1U)
                    for (std::size_t w = 0; w < words; ++w) next[x][w] |= base[z][w];
        reach = std::move(next);
    }
    throw Error(ErrorCode::HorizonNotFound,
                "no power up to " + std::to_string(max_t) + " is entrywise positive");
}

double minorization_coefficient(const SubMarkovKernel& k, const Distribution& nu) {
    require_same_size(k, nu, "minorization_coefficient");
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < k.n(); ++y) {
        const double mass = k.row_sum(y);
        for (std::size_t x = 0; x < k.n(); ++x) {
            if (!(nu[x] > 0.0)) continue;
            c = std::min(c, (k(y, x) / mass) / nu[x]);
        }
    }
    return std::isfinite(c) ? std::max(c, 0.0) : 0.0;
}

}  // namespace qsdcert
