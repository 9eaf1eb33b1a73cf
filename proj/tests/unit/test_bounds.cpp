#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "qsdcert/bounds.hpp"
#include "qsdcert/error.hpp"
#include "support.hpp"

using namespace qsdcert;
using testing::random_distribution;
using testing::random_kernel;

namespace {

const Matrix kSym = Matrix::from_rows({{0.5, 0.25}, {0.25, 0.5}});
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Setup {
    SubMarkovKernel k;
    ConditionedFlow flow;
    DobrushinCertificate cert;
};

Setup setup(const SubMarkovKernel& k) {
    const QsdSolution q = compute_qsd(k, 1e-14);
    const std::uint64_t t0 = minimal_positive_horizon(k, 200);
    return {k, ConditionedFlow::from_qsd(k, q), dobrushin_constants(k, q.pi, t0)};
}

}  // namespace

TEST_CASE("oscillation") {
    const Distribution pi = Distribution::uniform(4);
    CHECK(osc_pi(pi, pi) == 0.0);
    CHECK(osc_pi(Distribution::dirac(4, 2), pi) == doctest::Approx(4.0));
    Stream rng(1, {1});
    for (int trial = 0; trial < 20; ++trial) {
        const Distribution mu = random_distribution(rng, 7);
        const Distribution p = random_distribution(rng, 7);
        double lo = kInf, hi = -kInf;
        for (std::size_t x = 0; x < 7; ++x) {
            lo = std::min(lo, mu[x] / p[x]);
            hi = std::max(hi, mu[x] / p[x]);
        }
        CHECK(osc_pi(mu, p) == doctest::Approx(hi - lo).epsilon(1e-14));
    }
}

TEST_CASE("L-infinity Perron-Frobenius check") {
    const Setup s = setup(validate_kernel(kSym));
    const BoundReport at_pi = linfty_pf_check(s.flow, s.flow.pi(), 7, s.cert);
    CHECK(at_pi.measured == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(at_pi.verdict == Verdict::Pass);

    const Distribution mu({0.9, 0.1});
    const BoundReport t0 = linfty_pf_check(s.flow, mu, 0, s.cert);
    CHECK(t0.bound == doctest::Approx(osc_pi(mu, s.flow.pi())));
    CHECK(t0.verdict == Verdict::Pass);

    Stream rng(2, {2});
    const Setup r = setup(random_kernel(rng, 5));
    for (std::uint64_t t = 1; t <= 60; ++t) {
        const BoundReport rep = linfty_pf_check(r.flow, Distribution::dirac(5, 0), t, r.cert);
        CHECK(rep.verdict == Verdict::Pass);
        CHECK(rep.slack >= -kSlackTolerance);
    }
}

TEST_CASE("certificate hash must match") {
    const Setup a = setup(validate_kernel(kSym));
    Stream rng(3, {3});
    const Setup b = setup(random_kernel(rng, 2));
    try {
        linfty_pf_check(a.flow, a.flow.pi(), 1, b.cert);
        FAIL("expected CertificateMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CertificateMismatch);
    }
}

TEST_CASE("killing probability and conditioned checks") {
    const Setup s = setup(validate_kernel(kSym));
    CHECK(killing_prob_check(s.flow, s.flow.pi(), 5, s.cert).measured == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(conditioned_linfty_check(s.flow, s.flow.pi(), 5, s.cert).measured ==
          doctest::Approx(0.0).epsilon(1e-14));

    // A start concentrated where phi is small makes the denominator negative early on.
    Stream rng(4, {4});
    bool saw_na = false;
    for (int trial = 0; trial < 20 && !saw_na; ++trial) {
        const Setup r = setup(random_kernel(rng, 6, 0.5));
        std::size_t low = 0;
        for (std::size_t x = 1; x < 6; ++x)
            if (r.flow.phi()[x] < r.flow.phi()[low]) low = x;
        saw_na = conditioned_linfty_check(r.flow, Distribution::dirac(6, low), 0, r.cert).verdict ==
                 Verdict::NotApplicable;
    }
    CHECK(saw_na);
}

TEST_CASE("uniform and comparison checks on the symmetric kernel") {
    const Setup s = setup(validate_kernel(kSym));
    const BoundReport u = uniform_conditioned_check(s.flow, 8, s.cert);
    CHECK(u.verdict == Verdict::Pass);
    const auto [up, down] = comparison_check(s.flow, 4, s.cert);
    CHECK(up.verdict == Verdict::Pass);
    CHECK(down.verdict == Verdict::Pass);
    const auto [up1, down1] = comparison_check(s.flow, 1, s.cert);
    CHECK(up1.verdict == Verdict::NotApplicable);
    CHECK(down1.verdict == Verdict::NotApplicable);
}

TEST_CASE("one-state kernel") {
    const Setup s = setup(validate_kernel(Matrix::from_rows({{0.4}})));
    for (std::uint64_t t = 4; t <= 20; ++t) {
        const BoundReport u = uniform_conditioned_check(s.flow, t, s.cert);
        CHECK(u.measured == 0.0);
        CHECK(u.verdict == Verdict::Pass);
    }
}

TEST_CASE("Lp errors") {
    Stream rng(5, {5});
    const Setup s = setup(random_kernel(rng, 6));
    for (double p : {1.0, 1.5, 2.0, 4.0, kInf}) CHECK(lp_error(s.flow, s.flow.pi(), 3, p) == doctest::Approx(0.0).epsilon(1e-13));
    for (int trial = 0; trial < 50; ++trial) {
        const Distribution mu = random_distribution(rng, 6);
        const std::uint64_t t = trial % 7;
        const double l1 = lp_error(s.flow, mu, t, 1.0);
        const double linf = lp_error(s.flow, mu, t, kInf);
        double prev = l1;
        for (double p : {1.5, 2.0, 4.0}) {
            const double lp = lp_error(s.flow, mu, t, p);
            CHECK(lp <= std::pow(l1, 1.0 / p) * std::pow(linf, 1.0 - 1.0 / p) + 1e-12);
            CHECK(lp >= prev - 1e-12);
            prev = lp;
        }
        const Distribution law = conditioned_evolve(s.k, mu, t);
        CHECK(l1 == doctest::Approx(2.0 * total_variation(law.values(), s.flow.pi().values())).epsilon(1e-12));
    }
}

TEST_CASE("sweep over random kernels") {
    Stream rng(6, {6});
    for (int trial = 0; trial < 25; ++trial) {
        const Setup s = setup(random_kernel(rng, 2 + trial % 10, trial % 2 ? 0.4 : 0.0));
        SweepOptions opt;
        opt.t_max = 60;
        const SweepResult r = certify_sweep(s.flow, s.cert, opt);
        CHECK(r.fail == 0);
        CHECK(r.min_slack >= -kSlackTolerance);
        CHECK(r.applicability_monotone);
        CHECK(r.worst_interpolation_gap <= 1e-12);
        CHECK(r.worst_lp_monotonicity >= -1e-12);
        CHECK(r.pass > 0);
    }
}

TEST_CASE("L-infinity error is nonincreasing along multiples of t0") {
    Stream rng(7, {7});
    for (int trial = 0; trial < 10; ++trial) {
        const Setup s = setup(random_kernel(rng, 5, 0.4));
        const std::uint64_t t0 = s.cert.t0;
        const Distribution mu = random_distribution(rng, 5);
        double prev = kInf;
        for (std::uint64_t m = 0; m <= 10; ++m) {
            const double e = linfty_pf_check(s.flow, mu, m * t0, s.cert).measured;
            CHECK(e <= prev + 1e-12);
            prev = e;
        }
    }
}

TEST_CASE("reports CSV") {
    const Setup s = setup(validate_kernel(kSym));
    SweepOptions opt;
    opt.t_max = 5;
    const SweepResult r = certify_sweep(s.flow, s.cert, opt);
    const std::string csv = reports_csv(r.reports, BoundKind::LInftyPF, s.k.hash(), 2);
    CHECK(csv.find("t,measured,bound,slack,verdict") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 1 + 6);
    CHECK(to_string(Verdict::NotApplicable) == "NOT_APPLICABLE");
}
