#include "qsdcert/pdmp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qsdcert/error.hpp"
#include "qsdcert/linear_program.hpp"

namespace qsdcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBoundaryTimeTol = 1e-12;

struct NullObserver {
    void jump(double, const ProcessState&) {}
};

struct RecordingObserver {
    Trajectory* traj;
    void jump(double t, const ProcessState& s) {
        traj->events.push_back({t, s.x, s.regime, s.angle});
    }
};

// Time until the ray x + s v leaves the open box; +inf if it never does.
double box_exit_time(const Box& box, const Point& x, std::span<const double> v) {
    double s = kInf;
    for (std::size_t k = 0; k < box.dim(); ++k) {
        if (v[k] > 0.0) s = std::min(s, (box.hi[k] - x[k]) / v[k]);
        else if (v[k] < 0.0) s = std::min(s, (box.lo[k] - x[k]) / v[k]);
    }
    return std::max(s, 0.0);
}

double disk_exit_time(const Disk& disk, const Point& x, double dx, double dy) {
    const double px = x[0] - disk.center[0];
    const double py = x[1] - disk.center[1];
    const double b = px * dx + py * dy;
    const double c = px * px + py * py - disk.radius * disk.radius;
    const double disc = std::sqrt(std::max(b * b - c, 0.0));
    // Positive root of s^2 + 2 b s + c = 0 without cancellation.
    const double s = b > 0.0 ? -c / (b + disc) : disc - b;
    return std::max(s, 0.0);
}

double domain_exit_time(const Domain& domain, const Point& x, double dx, double dy) {
    if (const auto* disk = std::get_if<Disk>(&domain)) return disk_exit_time(*disk, x, dx, dy);
    const double v[2] = {dx, dy};
    return box_exit_time(std::get<Box>(domain), x, v);
}

// Competing exponential clocks out of the current regime.
std::pair<double, std::size_t> next_jump(const JumpRates& rates, std::size_t i, Stream& rng) {
    double tau = kInf;
    std::size_t target = i;
    for (std::size_t j = 0; j < rates.size(); ++j) {
        if (j == i) continue;
        const double e = rng.exponential(rates.rate(i, j));
        if (e < tau) {
            tau = e;
            target = j;
        }
    }
    return {tau, target};
}

template <typename Observer>
bool advance_pcmp(const PdmpSpec& spec, ProcessState& st, double duration, Stream& rng,
                  double t_start, double* absorbed_after, Observer& obs) {
    double elapsed = 0.0;
    const std::size_t d = spec.dim();
    while (true) {
        const auto& v = std::get<ConstantDrift>(spec.regimes[st.regime]).v;
        const auto [tau, target] = next_jump(spec.rates, st.regime, rng);
        const double exit = box_exit_time(spec.domain, st.x, v);
        const double remaining = duration - elapsed;
        if (exit <= std::min(tau, remaining)) {
            for (std::size_t k = 0; k < d; ++k) st.x[k] += exit * v[k];
            if (absorbed_after) *absorbed_after = elapsed + exit;
            return false;
        }
        if (remaining <= tau) {
            for (std::size_t k = 0; k < d; ++k) st.x[k] += remaining * v[k];
            return true;
        }
        for (std::size_t k = 0; k < d; ++k) st.x[k] += tau * v[k];
        elapsed += tau;
        st.regime = target;
        obs.jump(t_start + elapsed, st);
    }
}

double rk4_step(const Drift& drift, double x, double h) {
    const double k1 = velocity_1d(drift, x);
    const double k2 = velocity_1d(drift, x + 0.5 * h * k1);
    const double k3 = velocity_1d(drift, x + 0.5 * h * k2);
    const double k4 = velocity_1d(drift, x + h * k3);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double max_speed_1d(const PdmpSpec& spec) {
    const double lo = spec.domain.lo[0];
    const double hi = spec.domain.hi[0];
    double m = 0.0;
    for (const Drift& d : spec.regimes)
        for (int k = 0; k <= 1000; ++k)
            m = std::max(m, std::fabs(velocity_1d(d, lo + (hi - lo) * k / 1000.0)));
    return m;
}

template <typename Observer>
bool advance_general_1d(const PdmpSpec& spec, ProcessState& st, double duration, Stream& rng,
                        double t_start, double* absorbed_after, Observer& obs) {
    const double lo = spec.domain.lo[0];
    const double hi = spec.domain.hi[0];
    const double length = hi - lo;
    const double h = spec.step > 0.0 ? spec.step : 1e-3 * length / std::max(max_speed_1d(spec), 1e-300);
    const double err_tol = spec.step_tolerance * length;
    auto inside_open = [&](double x) { return x > lo && x < hi; };

    double elapsed = 0.0;
    while (true) {
        const Drift& drift = spec.regimes[st.regime];
        const auto [tau, target] = next_jump(spec.rates, st.regime, rng);
        const double remaining = duration - elapsed;
        const double segment = std::min(tau, remaining);
        double s = 0.0;
        while (s < segment) {
            const double dt = std::min(h, segment - s);
            const double full = rk4_step(drift, st.x[0], dt);
            const double halves = rk4_step(drift, rk4_step(drift, st.x[0], 0.5 * dt), 0.5 * dt);
            if (std::fabs(full - halves) / 15.0 > err_tol)
                throw Error(ErrorCode::StepTooCoarse,
                            "per-step error estimate " + std::to_string(std::fabs(full - halves) / 15.0) +
                                " exceeds " + std::to_string(err_tol) + " at x = " +
                                std::to_string(st.x[0]));
            if (!inside_open(full)) {
                double a = 0.0;
                double b = dt;
                while (b - a > kBoundaryTimeTol) {
                    const double mid = 0.5 * (a + b);
                    if (inside_open(rk4_step(drift, st.x[0], mid))) a = mid;
                    else b = mid;
                }
                st.x[0] = full <= lo ? lo : hi;
                if (absorbed_after) *absorbed_after = elapsed + s + b;
                return false;
            }
            st.x[0] = full;
            s += dt;
        }
        elapsed += segment;
        if (remaining <= tau) return true;
        st.regime = target;
        obs.jump(t_start + elapsed, st);
    }
}

template <typename Observer>
bool advance_neutron(const NeutronSpec& spec, ProcessState& st, double duration, Stream& rng,
                     double t_start, double* absorbed_after, Observer& obs) {
    double elapsed = 0.0;
    while (true) {
        const double dx = std::cos(st.angle);
        const double dy = std::sin(st.angle);
        const double tau = rng.exponential(spec.scatter_rate);
        const double exit = domain_exit_time(spec.domain, st.x, dx, dy);
        const double remaining = duration - elapsed;
        if (exit <= std::min(tau, remaining)) {
            st.x[0] += exit * dx;
            st.x[1] += exit * dy;
            if (absorbed_after) *absorbed_after = elapsed + exit;
            return false;
        }
        if (remaining <= tau) {
            st.x[0] += remaining * dx;
            st.x[1] += remaining * dy;
            return true;
        }
        st.x[0] += tau * dx;
        st.x[1] += tau * dy;
        elapsed += tau;
        st.angle = kTwoPi * rng.uniform();
        obs.jump(t_start + elapsed, st);
    }
}

template <typename Observer>
bool advance_impl(const ProcessSpec& spec, ProcessState& st, double duration, Stream& rng,
                  double t_start, double* absorbed_after, Observer& obs) {
    if (const auto* p = std::get_if<PdmpSpec>(&spec)) {
        if (p->mode == PdmpMode::Pcmp)
            return advance_pcmp(*p, st, duration, rng, t_start, absorbed_after, obs);
        return advance_general_1d(*p, st, duration, rng, t_start, absorbed_after, obs);
    }
    return advance_neutron(std::get<NeutronSpec>(spec), st, duration, rng, t_start, absorbed_after,
                           obs);
}

void check_box(const Box& box) {
    if (box.dim() == 0 || box.dim() > kMaxDim || box.hi.size() != box.dim())
        throw Error(ErrorCode::InvalidSpec, "domain needs matching lo/hi of dimension 1..4");
    for (std::size_t k = 0; k < box.dim(); ++k)
        if (!(box.lo[k] < box.hi[k]))
            throw Error(ErrorCode::InvalidSpec, "empty domain along axis " + std::to_string(k), {k});
}

void combinations(std::size_t n, std::size_t k, std::size_t start, std::vector<std::size_t>& cur,
                  std::vector<std::vector<std::size_t>>& out) {
    if (cur.size() == k) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = start; i < n; ++i) {
        cur.push_back(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

}  // namespace

bool Box::contains(const Point& x) const {
    for (std::size_t k = 0; k < dim(); ++k)
        if (!(x[k] > lo[k] && x[k] < hi[k])) return false;
    return true;
}

bool Disk::contains(const Point& x) const {
    const double dx = x[0] - center[0];
    const double dy = x[1] - center[1];
    return dx * dx + dy * dy < radius * radius;
}

Box Disk::bounding_box() const {
    return {{center[0] - radius, center[1] - radius}, {center[0] + radius, center[1] + radius}};
}

double velocity_1d(const Drift& drift, double x) {
    if (const auto* c = std::get_if<ConstantDrift>(&drift)) return c->v.at(0);
    if (const auto* p = std::get_if<PolynomialDrift>(&drift)) {
        double acc = 0.0;
        for (auto it = p->coefficients.rbegin(); it != p->coefficients.rend(); ++it) acc = acc * x + *it;
        return acc;
    }
    const auto& t = std::get<TabulatedDrift>(drift);
    if (x <= t.x.front()) return t.v.front();
    if (x >= t.x.back()) return t.v.back();
    const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - t.x.begin());
    const double w = (x - t.x[k - 1]) / (t.x[k] - t.x[k - 1]);
    return (1.0 - w) * t.v[k - 1] + w * t.v[k];
}

Vector stationary_rates(const Matrix& q) {
    if (!q.square()) throw Error(ErrorCode::NotSquare, "rate matrix must be square");
    const auto n = static_cast<Eigen::Index>(q.rows());
    Eigen::MatrixXd a(n + 1, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(j, i) = q(i, j);
    a.row(n).setOnes();
    rhs(n) = 1.0;
    const Eigen::VectorXd w = a.colPivHouseholderQr().solve(rhs);
    Vector omega(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) omega[i] = std::max(w(i), 0.0);
    const double s = sum(omega);
    for (double& x : omega) x /= s;
    return omega;
}

JumpRates JumpRates::from_generator(const Matrix& q) {
    if (!q.square() || q.rows() == 0) throw Error(ErrorCode::InvalidSpec, "rates must be square");
    const std::size_t n = q.rows();
    bool any = false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && q(i, j) != 0.0) any = true;
    JumpRates r;
    r.omega_ = any ? stationary_rates(q) : Vector(n, 1.0 / static_cast<double>(n));
    r.flux_ = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) r.flux_(i, j) = r.omega_[i] * q(i, j);
    return r;
}

double JumpRates::rate(std::size_t i, std::size_t j) const {
    return omega_[i] > 0.0 ? flux_(i, j) / omega_[i] : 0.0;
}

double JumpRates::exit_rate(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < size(); ++j)
        if (j != i) s += rate(i, j);
    return s;
}

Matrix JumpRates::generator() const {
    const std::size_t n = size();
    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) q(i, j) = rate(i, j);
        q(i, i) = -exit_rate(i);
    }
    return q;
}

JumpRates JumpRates::reversed() const {
    JumpRates r;
    r.omega_ = omega_;
    r.flux_ = flux_.transpose();
    return r;
}

void validate_spec(const PdmpSpec& spec) {
    check_box(spec.domain);
    const std::size_t d = spec.dim();
    const std::size_t n = spec.regimes.size();
    if (n == 0) throw Error(ErrorCode::InvalidSpec, "at least one regime required");
    if (spec.rates.size() != n)
        throw Error(ErrorCode::InvalidSpec, "rate matrix size differs from the regime count");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && !(spec.rates.rate(i, j) > 0.0))
                throw Error(ErrorCode::InvalidSpec,
                            "rate " + std::to_string(i) + "->" + std::to_string(j) + " must be positive",
                            {i, j});

    if (spec.mode == PdmpMode::Pcmp) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto* c = std::get_if<ConstantDrift>(&spec.regimes[i]);
            if (!c || c->v.size() != d)
                throw Error(ErrorCode::InvalidSpec,
                            "regime " + std::to_string(i) + " needs a constant drift of dimension " +
                                std::to_string(d),
                            {i});
        }
        check_standing_assumption(spec);
        return;
    }

    if (d != 1) throw Error(ErrorCode::InvalidSpec, "general drifts are supported in one dimension only");
    bool has_pos = false;
    bool has_neg = false;
    const double lo = spec.domain.lo[0];
    const double hi = spec.domain.hi[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (const auto* t = std::get_if<TabulatedDrift>(&spec.regimes[i])) {
            if (t->x.size() < 2 || t->x.size() != t->v.size() ||
                !std::is_sorted(t->x.begin(), t->x.end()) ||
                std::adjacent_find(t->x.begin(), t->x.end()) != t->x.end())
                throw Error(ErrorCode::InvalidSpec,
                            "regime " + std::to_string(i) + " table needs >= 2 increasing nodes", {i});
        }
        if (const auto* c = std::get_if<ConstantDrift>(&spec.regimes[i]); c && c->v.size() != 1)
            throw Error(ErrorCode::InvalidSpec, "regime " + std::to_string(i) + " drift must be scalar", {i});
        int sign = 0;
        for (int k = 0; k <= 4096; ++k) {
            const double v = velocity_1d(spec.regimes[i], lo + (hi - lo) * k / 4096.0);
            const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
            if (s == 0 || (sign != 0 && s != sign))
                throw Error(ErrorCode::InvalidSpec,
                            "regime " + std::to_string(i) + " drift vanishes on the closed domain", {i});
            sign = s;
        }
        (sign > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw Error(ErrorCode::InvalidSpec, "need one inward and one outward drift at each end");
}

void validate_spec(const NeutronSpec& spec) {
    if (!(spec.scatter_rate > 0.0)) throw Error(ErrorCode::InvalidSpec, "scatter_rate must be positive");
    if (const auto* disk = std::get_if<Disk>(&spec.domain)) {
        if (!(disk->radius > 0.0)) throw Error(ErrorCode::InvalidSpec, "disk radius must be positive");
        return;
    }
    const Box& box = std::get<Box>(spec.domain);
    check_box(box);
    if (box.dim() != 2) throw Error(ErrorCode::InvalidSpec, "neutron transport domain is planar");
}

void validate_spec(const ProcessSpec& spec) {
    std::visit([](const auto& s) { validate_spec(s); }, spec);
}

Box bounding_box(const ProcessSpec& spec) {
    if (const auto* p = std::get_if<PdmpSpec>(&spec)) return p->domain;
    const Domain& d = std::get<NeutronSpec>(spec).domain;
    if (const auto* disk = std::get_if<Disk>(&d)) return disk->bounding_box();
    return std::get<Box>(d);
}

bool inside(const ProcessSpec& spec, const Point& x) {
    if (const auto* p = std::get_if<PdmpSpec>(&spec)) return p->domain.contains(x);
    return std::visit([&](const auto& dom) { return dom.contains(x); },
                      std::get<NeutronSpec>(spec).domain);
}

bool advance(const ProcessSpec& spec, ProcessState& state, double duration, Stream& rng,
             double* absorbed_after) {
    NullObserver obs;
    return advance_impl(spec, state, duration, rng, 0.0, absorbed_after, obs);
}

Trajectory simulate(const ProcessSpec& spec, const ProcessState& start, double horizon,
                    std::uint64_t seed) {
    if (!inside(spec, start.x)) throw Error(ErrorCode::StartOutsideDomain, "start is not inside the open domain");
    if (const auto* p = std::get_if<PdmpSpec>(&spec); p && start.regime >= p->regimes.size())
        throw Error(ErrorCode::InvalidSpec, "start regime out of range");
    Trajectory traj;
    traj.horizon = horizon;
    traj.events.push_back({0.0, start.x, start.regime, start.angle});
    RecordingObserver obs{&traj};
    ProcessState st = start;
    Stream rng(seed, {0});
    double hit = 0.0;
    if (!advance_impl(spec, st, horizon, rng, 0.0, &hit, obs)) traj.absorbed_at = hit;
    const double end = traj.absorbed_at.value_or(horizon);
    if (end > traj.events.back().time) traj.events.push_back({end, st.x, st.regime, st.angle});
    return traj;
}

PdmpSpec reversed_spec(const PdmpSpec& spec) {
    PdmpSpec out = spec;
    out.rates = spec.rates.reversed();
    for (Drift& d : out.regimes) {
        std::visit(
            [](auto& drift) {
                using T = std::decay_t<decltype(drift)>;
                if constexpr (std::is_same_v<T, ConstantDrift>) {
                    for (double& x : drift.v) x = -x;
                } else if constexpr (std::is_same_v<T, PolynomialDrift>) {
                    for (double& x : drift.coefficients) x = -x;
                } else {
                    for (double& x : drift.v) x = -x;
                }
            },
            d);
    }
    return out;
}

AssumptionReport check_standing_assumption(const PdmpSpec& spec) {
    if (spec.mode != PdmpMode::Pcmp)
        throw Error(ErrorCode::InvalidSpec, "standing assumption check applies to constant drifts");
    const std::size_t d = spec.dim();
    const std::size_t n = spec.regimes.size();
    std::vector<std::vector<double>> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* c = std::get_if<ConstantDrift>(&spec.regimes[i]);
        if (!c || c->v.size() != d) throw Error(ErrorCode::InvalidSpec, "drift dimension mismatch", {i});
        v[i] = c->v;
    }

    AssumptionReport rep;
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::size_t> cur;
    combinations(n, d, 0, cur, subsets);
    for (const auto& idx : subsets) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        double scale = 1.0;
        for (std::size_t c = 0; c < d; ++c) {
            double norm = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[idx[c]][r];
                norm += v[idx[c]][r] * v[idx[c]][r];
            }
            scale *= std::sqrt(norm);
        }
        if (!(std::fabs(m.determinant()) > 1e-10 * scale)) {
            std::string label;
            for (std::size_t k : idx) label += (label.empty() ? "" : ",") + std::to_string(k + 1);
            throw Error(ErrorCode::DegenerateSubset, "drifts (" + label + ") are linearly dependent", idx);
        }
    }
    rep.subsets_independent = true;

    // Variables (b_1..b_n, s) with a_k = s + b_k: maximize s subject to
    // sum a = 1 and sum a_k v_k = 0.
    Matrix a(d + 1, n + 1);
    Vector b(d + 1, 0.0);
    Vector c(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) a(0, k) = 1.0;
    a(0, n) = static_cast<double>(n);
    b[0] = 1.0;
    for (std::size_t r = 0; r < d; ++r) {
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            a(r + 1, k) = v[k][r];
            total += v[k][r];
        }
        a(r + 1, n) = total;
    }
    c[n] = 1.0;
    const LpResult lp = maximize(a, b, c);
    if (lp.status != LpStatus::Optimal)
        throw Error(ErrorCode::HullInfeasible, "0 is not in the convex hull of the drifts");
    rep.hull_feasible = true;
    rep.interior_weight = lp.objective;
    rep.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k) rep.weights[k] = lp.x[k] + lp.x[n];
    return rep;
}

}  // namespace qsdcert
