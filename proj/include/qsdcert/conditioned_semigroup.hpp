#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsdcert/finite_kernel.hpp"

namespace qsdcert {

/// A kernel together with its full-support QSD. Carries the right
/// eigenfunction when it is known, since several bounds evaluate mu(phi).
class ConditionedFlow {
public:
    /// Throws ZeroPiEntry, NotQsd (residual above 1e-9).
    ConditionedFlow(SubMarkovKernel kernel, Distribution pi, Vector phi = {});
    static ConditionedFlow from_qsd(const SubMarkovKernel& kernel, const QsdSolution& qsd);

    const SubMarkovKernel& kernel() const noexcept { return kernel_; }
    const Distribution& pi() const noexcept { return pi_; }
    double lambda() const noexcept { return lambda_; }
    const Vector& phi() const noexcept { return phi_; }
    bool has_phi() const noexcept { return !phi_.empty(); }
    std::size_t n() const noexcept { return kernel_.n(); }

    /// The same chain observed every t0 steps: kernel P^t0, eigenvalue lambda^t0.
    ConditionedFlow at_horizon(std::uint64_t t0) const;

private:
    SubMarkovKernel kernel_;
    Distribution pi_;
    double lambda_ = 0.0;
    Vector phi_;
};

/// mu P^t / (mu P^t 1). Throws Extinct once the survival mass would drop below
/// 1e-300; Error::indices() holds the last safe t.
Distribution conditioned_evolve(const SubMarkovKernel& k, const Distribution& mu, std::uint64_t t);

/// (T f)(y) = sum_x f(x) pi(x) P(x,y) / sum_x pi(x) P(x,y).
Vector t_operator(const ConditionedFlow& flow, std::span<const double> f);

/// (T^dag mu)(x) = lambda^-1 (sum_y P(x,y) mu(y) / pi(y)) pi(x).
Distribution t_dagger(const ConditionedFlow& flow, const Distribution& mu);

/// Best Doeblin pair for the row-normalized reverse kernel at horizon t0:
/// nu proportional to the column minima, c0 their total.
struct ReverseMinorization {
    double c0 = 0.0;
    Distribution nu;
};
ReverseMinorization reverse_minorization(const ConditionedFlow& flow, std::uint64_t t0);

/// Fixed point of T^dag by Banach iteration of T^dag_{t0}; stops once a step
/// moves less than tol * c0 in l1, so the result is within tol of the fixed
/// point. Throws NoContraction when the reverse kernel at t0 has no
/// minorization.
Distribution stationary_of_t_dagger(const ConditionedFlow& flow, double tol = 1e-12,
                                    std::uint64_t t0 = 1);

double total_variation(std::span<const double> a, std::span<const double> b);

struct AuditRow {
    std::size_t trial = 0;
    std::size_t n = 0;
    double tv_before = 0.0;
    double tv_after = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

struct ContractionAudit {
    std::uint64_t seed = 0;
    std::uint64_t t0 = 1;
    double c0 = 0.0;
    std::vector<AuditRow> rows;
    double worst_ratio = 0.0;
};

/// Draws `trials` random probability pairs (normalized uniform(0,1) entries)
/// and checks TV((T^dag_t0)^n mu1, (T^dag_t0)^n mu2) <= (1-c0)^n TV(mu1, mu2)
/// + 1e-12 for n = 1..10. ratio = tv_after / ((1-c0)^n tv_before).
/// Throws ContractionViolated naming the trial and n.
ContractionAudit contraction_audit(const ConditionedFlow& flow, std::uint64_t t0, double c0,
                                   std::size_t trials, std::uint64_t seed = 1);

std::string audit_csv(const ContractionAudit& audit);

}  // namespace qsdcert
