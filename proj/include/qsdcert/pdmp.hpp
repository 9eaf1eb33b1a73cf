#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "qsdcert/matrix.hpp"
#include "qsdcert/rng.hpp"

namespace qsdcert {

inline constexpr std::size_t kMaxDim = 4;
using Point = std::array<double, kMaxDim>;

/// Axis-aligned open box; its dimension is lo.size().
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
    std::size_t dim() const noexcept { return lo.size(); }
    bool contains(const Point& x) const;
    bool operator==(const Box&) const = default;
};

/// Open planar disk.
struct Disk {
    std::array<double, 2> center{0.0, 0.0};
    double radius = 1.0;
    bool contains(const Point& x) const;
    Box bounding_box() const;
    bool operator==(const Disk&) const = default;
};

using Domain = std::variant<Box, Disk>;

struct ConstantDrift {
    std::vector<double> v;
    bool operator==(const ConstantDrift&) const = default;
};
/// v(x) = sum_k coefficients[k] x^k.
struct PolynomialDrift {
    std::vector<double> coefficients;
    bool operator==(const PolynomialDrift&) const = default;
};
/// Piecewise-linear interpolation through (x[k], v[k]), constant beyond the ends.
struct TabulatedDrift {
    std::vector<double> x;
    std::vector<double> v;
    bool operator==(const TabulatedDrift&) const = default;
};
using Drift = std::variant<ConstantDrift, PolynomialDrift, TabulatedDrift>;

double velocity_1d(const Drift& drift, double x);

/// Regime-switching rates held in flux form: omega is the stationary law of the
/// generator Q and flux(i,j) = omega_i Q_ij. Time reversal transposes the
/// flux and keeps omega, so reversing twice restores every bit.
class JumpRates {
public:
    JumpRates() = default;
    /// From a generator matrix (off-diagonal rates, rows summing to zero).
    /// An all-zero generator gets uniform omega.
    static JumpRates from_generator(const Matrix& q);

    std::size_t size() const noexcept { return omega_.size(); }
    double rate(std::size_t i, std::size_t j) const;
    double exit_rate(std::size_t i) const;
    Matrix generator() const;
    const Vector& omega() const noexcept { return omega_; }
    const Matrix& flux() const noexcept { return flux_; }
    JumpRates reversed() const;

    bool operator==(const JumpRates&) const = default;

private:
    Vector omega_;
    Matrix flux_;
};

/// omega Q = 0, sum omega = 1, by a dense least-squares solve.
Vector stationary_rates(const Matrix& q);

enum class PdmpMode { Pcmp, General1d };

/// Absorbed piecewise-deterministic process with regime-dependent drift.
struct PdmpSpec {
    PdmpMode mode = PdmpMode::Pcmp;
    Box domain;
    std::vector<Drift> regimes;
    JumpRates rates;
    /// Fixed integrator step for General1d; 0 selects 1e-3 * length / max|v|.
    double step = 0.0;
    /// Largest accepted per-step error estimate for General1d, relative to the
    /// domain length.
    double step_tolerance = 1e-8;

    std::size_t dim() const noexcept { return domain.dim(); }
    bool operator==(const PdmpSpec&) const = default;
};

/// Unit-speed planar transport with uniform re-orientation at rate scatter_rate.
struct NeutronSpec {
    Domain domain = Disk{};
    double scatter_rate = 1.0;
    bool operator==(const NeutronSpec&) const = default;
};

using ProcessSpec = std::variant<PdmpSpec, NeutronSpec>;

/// Position plus regime (PDMP) or heading angle in [0, 2 pi) (neutron transport).
struct ProcessState {
    Point x{};
    std::size_t regime = 0;
    double angle = 0.0;
};

struct TrajectoryEvent {
    double time = 0.0;
    Point x{};
    std::size_t regime = 0;
    double angle = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryEvent> events;
    std::optional<double> absorbed_at;
    double horizon = 0.0;
};

/// Full invariant check: rates strictly positive off the diagonal; PCMP drifts
/// pass check_standing_assumption; General1d drifts nonvanishing on the closed
/// interval with both signs present. Throws InvalidSpec, DegenerateSubset,
/// HullInfeasible.
void validate_spec(const PdmpSpec& spec);
void validate_spec(const NeutronSpec& spec);
void validate_spec(const ProcessSpec& spec);

/// Domain bounding box and state dimension shared by both process kinds.
Box bounding_box(const ProcessSpec& spec);
bool inside(const ProcessSpec& spec, const Point& x);

/// Moves `state` forward by `duration`. Returns false when the process hits the
/// boundary first; `state` is then the exit point and `absorbed_after` the
/// elapsed time. Draws are horizon-consistent: with equal streams, a longer
/// duration replays the shorter run as an exact prefix.
bool advance(const ProcessSpec& spec, ProcessState& state, double duration, Stream& rng,
             double* absorbed_after = nullptr);

/// Throws StartOutsideDomain, StepTooCoarse.
Trajectory simulate(const ProcessSpec& spec, const ProcessState& start, double horizon,
                    std::uint64_t seed);

/// Negated drifts and reversed rates omega_i Q_ij = omega_j Qhat_ji.
PdmpSpec reversed_spec(const PdmpSpec& spec);

struct AssumptionReport {
    bool subsets_independent = false;
    bool hull_feasible = false;
    /// max over convex weights a with sum a_k v_k = 0 of min_k a_k.
    double interior_weight = 0.0;
    Vector weights;
};

/// PCMP drift-set checks: every d-subset linearly independent, 0 in the convex
/// hull, and 0 strictly interior (positive optimal minimum weight).
/// Throws DegenerateSubset (indices in Error::indices()) or HullInfeasible.
AssumptionReport check_standing_assumption(const PdmpSpec& spec);

}  // namespace qsdcert
