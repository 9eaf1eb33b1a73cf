#pragma once

#include <cstdint>

#include "qsdcert/bounds.hpp"
#include "qsdcert/conditioned_semigroup.hpp"

namespace qsdcert {

/// The chain conditioned never to be absorbed: q(x,y) = phi(y) P(x,y) / (lambda phi(x)),
/// stationary law beta = phi * pi.
struct QProcess {
    Matrix q;
    Distribution beta;
};

/// Throws NonPositiveEigenfunction if phi has a non-positive entry.
QProcess build_qprocess(const ConditionedFlow& flow, std::span<const double> phi);

struct ReversalReport {
    std::uint64_t t0 = 1;
    double max_discrepancy = 0.0;
    std::size_t worst_x = 0;
    std::size_t worst_y = 0;
};

/// Checks beta(x) q^t0(x,y) = beta(y) lambda^-t0 R(y,x) entrywise within `tol`,
/// where r is the reverse kernel of P^t0 at pi. Throws IdentityViolated.
ReversalReport qprocess_reversal_check(const QProcess& qp, const SubMarkovKernel& r, double lambda,
                                       std::uint64_t t0, double tol = 1e-11);

/// measured = sup_x |(mu q^t)(x) / beta(x) - 1|, bound (1-c0)^floor(t/t0) osc_beta(mu).
BoundReport qprocess_convergence_check(const QProcess& qp, const Distribution& mu,
                                       std::uint64_t t, const DobrushinCertificate& cert);

/// Row sums of q minus one, largest magnitude.
double stochasticity_defect(const QProcess& qp);
/// ||beta q - beta||_1.
double stationarity_defect(const QProcess& qp);

}  // namespace qsdcert
