#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "qsdcert/matrix.hpp"

namespace qsdcert {

inline constexpr double kMassSlack = 1e-12;

/// Nonnegative vector of total mass at most one. A mass deficit is the
/// probability already absorbed at the cemetery state.
class Distribution {
public:
    Distribution() = default;
    explicit Distribution(Vector w);

    static Distribution uniform(std::size_t n);
    static Distribution dirac(std::size_t n, std::size_t x);
    /// Rescales a nonnegative vector of positive mass to a probability vector.
    static Distribution normalized(Vector w);

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    std::span<const double> values() const noexcept { return w_; }
    double mass() const { return sum(w_); }
    bool is_probability(double tol = 1e-10) const;
    bool strictly_positive() const;

private:
    Vector w_;
};

/// One-step law of an absorbed chain: nonnegative square matrix, row sums in
/// (0, 1]. Construct through validate_kernel.
class SubMarkovKernel {
public:
    std::size_t n() const noexcept { return p_.rows(); }
    const Matrix& p() const noexcept { return p_; }
    double operator()(std::size_t x, std::size_t y) const { return p_(x, y); }
    /// Number of base time units one application of the kernel represents.
    std::uint64_t t_unit() const noexcept { return t_unit_; }
    std::uint64_t hash() const noexcept { return hash_; }
    double row_sum(std::size_t x) const { return row_sums_[x]; }
    std::span<const double> row_sums() const noexcept { return row_sums_; }

private:
    friend SubMarkovKernel validate_kernel(Matrix raw, std::uint64_t t_unit);
    SubMarkovKernel(Matrix p, std::uint64_t t_unit);

    Matrix p_;
    std::uint64_t t_unit_ = 1;
    std::uint64_t hash_ = 0;
    Vector row_sums_;
};

/// Throws NotSquare, NegativeEntry, RowSumExceedsOne or DeadRow (with the
/// offending row/entry in Error::indices()).
SubMarkovKernel validate_kernel(Matrix raw, std::uint64_t t_unit = 1);

/// P^t as a kernel whose t_unit is t times the base unit.
SubMarkovKernel kernel_power(const SubMarkovKernel& k, std::uint64_t t,
                             Execution exec = Execution::Parallel);

struct QsdSolution {
    Distribution pi;
    double lambda = 0.0;
    Vector phi;
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Both directed reachability checks on the support graph x -> y iff p(x,y) > 0.
bool is_irreducible(const SubMarkovKernel& k);
/// Period of an irreducible support graph (1 means aperiodic).
std::size_t period(const SubMarkovKernel& k);

/// Quasi-stationary distribution by conditioned power iteration
/// mu <- mu P / (mu P 1), followed by right power iteration for phi with
/// pi(phi) = 1. Once the step change drops below `tol` the iteration keeps
/// going while the change still decreases (at most `polish_steps` more) so the
/// returned pair sits at the floating-point fixed point.
/// Throws NotIrreducible; NoConvergence for periodic kernels or when
/// `max_iter` is exhausted.
QsdSolution compute_qsd(const SubMarkovKernel& k, double tol = 1e-12,
                        std::size_t max_iter = 1'000'000, std::size_t polish_steps = 64);

/// ||pi P - lambda pi||_1 with lambda = pi P 1.
double qsd_residual(const SubMarkovKernel& k, const Distribution& pi);

/// Time reversal at quasi-stationarity: R(y, x) = pi(x) P(x, y) / pi(y).
/// Row masses equal lambda (of the kernel's own horizon).
/// Throws ZeroPiEntry, NotQsd (residual above `qsd_tol`).
SubMarkovKernel reverse_kernel(const SubMarkovKernel& k, const Distribution& pi,
                               double qsd_tol = 1e-9);

struct AdjointKernel {
    double a = 0.0;
    SubMarkovKernel kernel;
};

/// Counting-measure adjoint: a = max column sum, P~(y, x) = P(x, y) / a.
AdjointKernel adjoint_kernel(const SubMarkovKernel& k);

struct DobrushinCertificate {
    std::uint64_t t0 = 1;
    double c0 = 0.0;
    double C2 = 0.0;
    double c3 = 0.0;
    Distribution nu;
    /// Hash of the unit-step kernel the certificate was computed for.
    std::uint64_t kernel_hash = 0;
};

/// Explicit finite-state constants from Q = P^t0:
///   c0 = min Q / (max pi * max col-sum Q)
///   C2 = max Q * max col-sum Q / min Q
///   c3 = n (min Q)^2 / (max pi * max col-sum Q * max row-sum Q)
/// with nu uniform. Throws NotPrimitiveAtHorizon if Q has a zero entry, NotQsd.
DobrushinCertificate dobrushin_constants(const SubMarkovKernel& k, const Distribution& pi,
                                         std::uint64_t t0);

/// Smallest t <= max_t with P^t entrywise positive. Throws HorizonNotFound.
std::uint64_t minimal_positive_horizon(const SubMarkovKernel& k, std::uint64_t max_t);

/// Largest c with K(y, .) / K1(y) >= c nu for every row y; 0 if none.
double minorization_coefficient(const SubMarkovKernel& k, const Distribution& nu);

}  // namespace qsdcert
