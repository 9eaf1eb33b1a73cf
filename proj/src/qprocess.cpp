#include "qsdcert/qprocess.hpp"

#include <algorithm>
#include <cmath>

#include "qsdcert/error.hpp"

namespace qsdcert {

QProcess build_qprocess(const ConditionedFlow& flow, std::span<const double> phi) {
    const std::size_t n = flow.n();
    if (phi.size() != n) throw Error(ErrorCode::DimensionMismatch, "phi has the wrong length");
    for (std::size_t x = 0; x < n; ++x)
        if (!(phi[x] > 0.0))
            throw Error(ErrorCode::NonPositiveEigenfunction,
                        "phi[" + std::to_string(x) + "] = " + std::to_string(phi[x]), {x});
    QProcess qp;
    qp.q = Matrix(n, n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            qp.q(x, y) = phi[y] * flow.kernel()(x, y) / (flow.lambda() * phi[x]);
    Vector beta(n);
    for (std::size_t x = 0; x < n; ++x) beta[x] = phi[x] * flow.pi()[x];
    qp.beta = Distribution::normalized(std::move(beta));
    return qp;
}

ReversalReport qprocess_reversal_check(const QProcess& qp, const SubMarkovKernel& r, double lambda,
                                       std::uint64_t t0, double tol) {
    const std::size_t n = qp.q.rows();
    if (r.n() != n) throw Error(ErrorCode::DimensionMismatch, "reverse kernel size differs");
    const Matrix qt = power(qp.q, t0);
    const double scale = std::pow(lambda, -static_cast<double>(t0));
    ReversalReport rep;
    rep.t0 = t0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            const double lhs = qp.beta[x] * qt(x, y);
            const double rhs = qp.beta[y] * scale * r(y, x);
            const double d = std::fabs(lhs - rhs);
            if (d > rep.max_discrepancy) {
                rep.max_discrepancy = d;
                rep.worst_x = x;
                rep.worst_y = y;
            }
        }
    }
    if (rep.max_discrepancy > tol)
        throw Error(ErrorCode::IdentityViolated,
                    "max discrepancy " + std::to_string(rep.max_discrepancy) + " at (" +
                        std::to_string(rep.worst_x) + "," + std::to_string(rep.worst_y) + ")",
                    {rep.worst_x, rep.worst_y});
    return rep;
}

BoundReport qprocess_convergence_check(const QProcess& qp, const Distribution& mu,
                                       std::uint64_t t, const DobrushinCertificate& cert) {
    const std::size_t n = qp.q.rows();
    if (mu.size() != n) throw Error(ErrorCode::DimensionMismatch, "mu has the wrong length");
    Vector v(mu.values().begin(), mu.values().end());
    for (std::uint64_t s = 0; s < t; ++s) v = left_multiply(v, qp.q);
    double measured = 0.0;
    for (std::size_t x = 0; x < n; ++x)
        measured = std::max(measured, std::fabs(v[x] / qp.beta[x] - 1.0));
    const CertificateSummary summary = summarize(cert);
    BoundReport r;
    r.kind = BoundKind::QProcessLInfty;
    r.t = t;
    r.measured = measured;
    r.bound = contraction_factor(summary, t) * osc_pi(mu, qp.beta);
    r.slack = r.bound - measured;
    r.verdict = measured <= r.bound + kSlackTolerance ? Verdict::Pass : Verdict::Fail;
    r.cert = summary;
    return r;
}

double stochasticity_defect(const QProcess& qp) {
    double worst = 0.0;
    for (double s : row_sums(qp.q)) worst = std::max(worst, std::fabs(s - 1.0));
    return worst;
}

double stationarity_defect(const QProcess& qp) {
    return l1_distance(left_multiply(qp.beta.values(), qp.q), qp.beta.values());
}

}  // namespace qsdcert
