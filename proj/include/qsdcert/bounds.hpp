#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsdcert/conditioned_semigroup.hpp"
#include "qsdcert/finite_kernel.hpp"

namespace qsdcert {

enum class BoundKind {
    LInftyPF,
    KillingProb,
    ConditionedLInfty,
    UniformConditioned,
    ComparisonUpper,
    ComparisonLower,
    LpError,
    QProcessLInfty,
};

enum class Verdict { Pass, Fail, NotApplicable };

std::string_view to_string(BoundKind kind);
std::string_view to_string(Verdict verdict);

inline constexpr double kSlackTolerance = 1e-10;

/// The constants a report was judged against.
struct CertificateSummary {
    std::uint64_t t0 = 1;
    double c0 = 0.0;
    double C2 = 0.0;
    double c3 = 0.0;
    std::uint64_t kernel_hash = 0;
};

CertificateSummary summarize(const DobrushinCertificate& cert);

/// slack = bound - measured for upper bounds and measured - bound for the
/// lower comparison bound, so a PASS always has slack >= -tolerance.
struct BoundReport {
    std::uint64_t t = 0;
    double measured = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    BoundKind kind = BoundKind::LInftyPF;
    Verdict verdict = Verdict::NotApplicable;
    CertificateSummary cert;
};

/// max mu/pi - min mu/pi.
double osc_pi(const Distribution& mu, const Distribution& pi);

/// Floor-exponent contraction factor (1-c0)^floor(steps / t0); steps may be
/// negative only when the caller already checked applicability.
double contraction_factor(const CertificateSummary& cert, std::uint64_t steps);

/// measured = sup_x |lambda^-t (mu P^t)(x) / pi(x) - mu(phi)|,
/// bound = (1-c0)^floor(t/t0) osc_pi(mu).
BoundReport linfty_pf_check(const ConditionedFlow& flow, const Distribution& mu, std::uint64_t t,
                            const DobrushinCertificate& cert);

/// measured = |lambda^-t P_mu(tau > t) - mu(phi)|, same bound as linfty_pf_check.
BoundReport killing_prob_check(const ConditionedFlow& flow, const Distribution& mu,
                               std::uint64_t t, const DobrushinCertificate& cert);

/// measured = sup_x |L_mu(X_t | tau > t)(x) / pi(x) - 1|,
/// bound = 2 e osc / (mu(phi) - e osc) with e = (1-c0)^floor(t/t0);
/// NotApplicable while the denominator is not positive.
BoundReport conditioned_linfty_check(const ConditionedFlow& flow, const Distribution& mu,
                                     std::uint64_t t, const DobrushinCertificate& cert);

/// Worst case over every Dirac start, bound 2 C2 e / (c3 - C2 e) with
/// e = (1-c0)^floor((t - 4 t0)/t0); NotApplicable for t < 4 t0 or a
/// non-positive denominator.
BoundReport uniform_conditioned_check(const ConditionedFlow& flow, std::uint64_t t,
                                      const DobrushinCertificate& cert);

/// Two-sided comparison of every Dirac-start conditioned law against pi at
/// t >= 2 t0: upper ratio against C2 / eps with eps = min_x P^t0 1(x), lower
/// ratio against c3. First report is the upper one.
std::pair<BoundReport, BoundReport> comparison_check(const ConditionedFlow& flow, std::uint64_t t,
                                                     const DobrushinCertificate& cert);

/// (sum_x |ratio(x) - 1|^p pi(x))^(1/p) of the conditioned density against pi;
/// p = infinity gives the sup.
double lp_error(const ConditionedFlow& flow, const Distribution& mu, std::uint64_t t, double p);

/// Report builders from already-evolved quantities, shared by the single-shot
/// checks above and the incremental sweep.
namespace detail {
BoundReport linfty_pf_from(const ConditionedFlow& flow, const Distribution& mu,
                           std::span<const double> scaled, std::uint64_t t,
                           const CertificateSummary& cert);
BoundReport killing_from(const ConditionedFlow& flow, const Distribution& mu,
                         std::span<const double> scaled, std::uint64_t t,
                         const CertificateSummary& cert);
BoundReport conditioned_from(const ConditionedFlow& flow, const Distribution& mu,
                             std::span<const double> law, std::uint64_t t,
                             const CertificateSummary& cert);
BoundReport uniform_from(const ConditionedFlow& flow, const Matrix& pt, std::uint64_t t,
                         const CertificateSummary& cert);
std::pair<BoundReport, BoundReport> comparison_from(const ConditionedFlow& flow, const Matrix& pt,
                                                    std::uint64_t t, double eps,
                                                    const CertificateSummary& cert);
double lp_from(const Distribution& pi, std::span<const double> law, double p);
}  // namespace detail

struct SweepOptions {
    std::uint64_t t_max = 100;
    /// Initial conditions for the per-start checks; empty means every Dirac
    /// start plus pi and the uniform law.
    std::vector<Distribution> starts;
    /// Evaluate the all-starts checks (uniform and comparison) every
    /// `matrix_stride` steps. 1 keeps every t; larger values trade coverage for
    /// fewer n^3 products on big grids.
    std::uint64_t matrix_stride = 1;
    std::vector<double> lp_orders = {1.5, 2.0, 4.0};
};

struct SweepResult {
    std::vector<BoundReport> reports;
    /// Hoelder interpolation gap lp(p) - lp(1)^(1/p) lp(inf)^(1-1/p); every
    /// entry must be <= 1e-12.
    double worst_interpolation_gap = -1.0;
    /// Lp error must be nondecreasing in p; most negative increment seen.
    double worst_lp_monotonicity = 0.0;
    /// Largest increase of the L-infinity PF error along consecutive t.
    double worst_linfty_increase = 0.0;
    bool applicability_monotone = true;
    std::size_t pass = 0;
    std::size_t fail = 0;
    std::size_t not_applicable = 0;
    double min_slack = 0.0;
};

/// Runs every check for t = 0..t_max, evolving each start incrementally.
SweepResult certify_sweep(const ConditionedFlow& flow, const DobrushinCertificate& cert,
                          const SweepOptions& options);

/// CSV with columns t,measured,bound,slack,verdict for one kind.
std::string reports_csv(std::span<const BoundReport> reports, BoundKind kind,
                        std::uint64_t kernel_hash, std::size_t n);

}  // namespace qsdcert
