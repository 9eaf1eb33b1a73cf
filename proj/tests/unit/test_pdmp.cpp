#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qsdcert/discretize.hpp"
#include "qsdcert/error.hpp"
#include "qsdcert/io.hpp"
#include "qsdcert/pdmp.hpp"
#include "qsdcert/spec_json.hpp"
#include "support.hpp"

using namespace qsdcert;

namespace {

PdmpSpec pcmp(std::vector<std::vector<double>> drifts, const Matrix& q, Box box) {
    PdmpSpec s;
    s.mode = PdmpMode::Pcmp;
    s.domain = std::move(box);
    for (auto& v : drifts) s.regimes.push_back(ConstantDrift{std::move(v)});
    s.rates = JumpRates::from_generator(q);
    return s;
}

const Box kUnit{{0.0}, {1.0}};
const Box kUnit2{{0.0, 0.0}, {1.0, 1.0}};

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ParseError;
}

ProcessState at(double x, std::size_t regime = 0) {
    ProcessState s;
    s.x[0] = x;
    s.regime = regime;
    return s;
}

}  // namespace

TEST_CASE("deterministic flight with zero rates") {
    const PdmpSpec s = pcmp({{1.0}, {-1.0}}, Matrix(2, 2), kUnit);
    const Trajectory t = simulate(s, at(0.5), 10.0, 1);
    REQUIRE(t.absorbed_at);
    CHECK(*t.absorbed_at == 0.5);
    CHECK(t.events.back().x[0] == 1.0);
    CHECK(simulate(s, at(0.25, 1), 10.0, 1).absorbed_at.value() == 0.25);
    CHECK_FALSE(simulate(s, at(0.5), 0.4, 1).absorbed_at);
}

TEST_CASE("neutron transport exits the unit disk at time equal to the radius") {
    NeutronSpec n;
    n.domain = Disk{{0.0, 0.0}, 1.0};
    n.scatter_rate = 1e-12;
    for (double angle : {0.0, 0.3, 1.0, 2.5, 4.0, 6.0}) {
        ProcessState st;
        st.angle = angle;
        const Trajectory t = simulate(n, st, 5.0, 3);
        REQUIRE(t.absorbed_at);
        CHECK(*t.absorbed_at == 1.0);
    }
    n.domain = Disk{{0.5, -0.25}, 2.0};
    ProcessState st;
    st.x = {0.5, -0.25};
    CHECK(simulate(n, st, 5.0, 3).absorbed_at.value() == 2.0);
}

TEST_CASE("neutron segments have unit speed and times increase") {
    NeutronSpec n;
    n.domain = Disk{{0.0, 0.0}, 3.0};
    n.scatter_rate = 2.0;
    const Trajectory t = simulate(n, ProcessState{}, 20.0, 9);
    REQUIRE(t.events.size() > 3);
    for (std::size_t i = 1; i < t.events.size(); ++i) {
        const auto& a = t.events[i - 1];
        const auto& b = t.events[i];
        CHECK(b.time > a.time);
        const double d = std::hypot(b.x[0] - a.x[0], b.x[1] - a.x[1]);
        CHECK(d == doctest::Approx(b.time - a.time).epsilon(1e-12));
    }
}

TEST_CASE("simulation is deterministic in the seed") {
    const PdmpSpec s = pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-3, 3}, {3, -3}}), kUnit);
    const Trajectory a = simulate(s, at(0.5), 5.0, 42);
    const Trajectory b = simulate(s, at(0.5), 5.0, 42);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].x == b.events[i].x);
        CHECK(a.events[i].regime == b.events[i].regime);
    }
    CHECK(a.absorbed_at == b.absorbed_at);
    const Trajectory c = simulate(s, at(0.5), 5.0, 43);
    CHECK((c.events.size() != a.events.size() || c.events[1].time != a.events[1].time));
}

TEST_CASE("a longer horizon replays the shorter run") {
    const PdmpSpec s = pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-4, 4}, {4, -4}}), kUnit);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Stream r1(seed, {0}), r2(seed, {0});
        ProcessState a = at(0.5), b = at(0.5);
        const bool short_alive = advance(s, a, 0.3, r1);
        const bool long_alive = advance(s, b, 0.6, r2);
        if (!short_alive) CHECK_FALSE(long_alive);
    }
}

TEST_CASE("start outside the domain") {
    const PdmpSpec s = pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-1, 1}, {1, -1}}), kUnit);
    CHECK(code_of([&] { simulate(s, at(1.5), 1.0, 1); }) == ErrorCode::StartOutsideDomain);
    CHECK(code_of([&] { simulate(s, at(0.0), 1.0, 1); }) == ErrorCode::StartOutsideDomain);
}

TEST_CASE("fourth-order integration of a linear drift") {
    PdmpSpec s;
    s.mode = PdmpMode::General1d;
    s.domain = kUnit;
    s.regimes = {PolynomialDrift{{1.0, 0.5}}, PolynomialDrift{{-1.0}}};
    s.rates = JumpRates::from_generator(Matrix(2, 2));
    // dx/dt = 1 + x/2 solves to x(t) = (x0 + 2) e^{t/2} - 2; it reaches 1 at 2 ln(3 / (x0 + 2)).
    for (double x0 : {0.1, 0.5, 0.9}) {
        const Trajectory t = simulate(s, at(x0), 10.0, 1);
        REQUIRE(t.absorbed_at);
        CHECK(*t.absorbed_at == doctest::Approx(2.0 * std::log(3.0 / (x0 + 2.0))).epsilon(1e-10));
    }
    ProcessState st = at(0.2);
    Stream rng(1, {0});
    CHECK(advance(s, st, 0.5, rng));
    CHECK(st.x[0] == doctest::Approx(2.2 * std::exp(0.25) - 2.0).epsilon(1e-12));

    s.step = 0.5;
    s.regimes[0] = PolynomialDrift{{1.0, 0.0, 0.0, 0.0, 40.0}};
    CHECK(code_of([&] { simulate(s, at(0.1), 1.0, 1); }) == ErrorCode::StepTooCoarse);
}

TEST_CASE("tabulated drift interpolates") {
    const Drift d = TabulatedDrift{{0.0, 1.0}, {1.0, 3.0}};
    CHECK(velocity_1d(d, 0.5) == 2.0);
    CHECK(velocity_1d(d, -1.0) == 1.0);
    CHECK(velocity_1d(d, 2.0) == 3.0);
    CHECK(velocity_1d(PolynomialDrift{{1.0, 2.0, 3.0}}, 2.0) == 17.0);
}

TEST_CASE("standing assumption examples") {
    const AssumptionReport r1 = check_standing_assumption(pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-1, 1}, {1, -1}}), kUnit));
    CHECK(r1.interior_weight == doctest::Approx(0.5).epsilon(1e-12));

    const Matrix q3 = Matrix::from_rows({{-2, 1, 1}, {1, -2, 1}, {1, 1, -2}});
    const AssumptionReport r2 = check_standing_assumption(pcmp({{1, 0}, {0, 1}, {-1, -1}}, q3, kUnit2));
    CHECK(r2.interior_weight == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    for (double a : r2.weights) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    try {
        check_standing_assumption(pcmp({{1, 0}, {2, 0}, {0, 1}}, q3, kUnit2));
        FAIL("expected DegenerateSubset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateSubset);
        CHECK(e.indices() == std::vector<std::size_t>{0, 1});
    }
    CHECK(code_of([&] { check_standing_assumption(pcmp({{1, 0}, {0, 1}, {1, 1}}, q3, kUnit2)); }) ==
          ErrorCode::HullInfeasible);
}

TEST_CASE("validate_spec") {
    CHECK_NOTHROW(validate_spec(pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-1, 1}, {1, -1}}), kUnit)));
    CHECK(code_of([&] { validate_spec(pcmp({{1.0}, {-1.0}}, Matrix(2, 2), kUnit)); }) == ErrorCode::InvalidSpec);
    PdmpSpec g;
    g.mode = PdmpMode::General1d;
    g.domain = kUnit;
    g.rates = JumpRates::from_generator(Matrix::from_rows({{-1, 1}, {1, -1}}));
    g.regimes = {PolynomialDrift{{1.0}}, PolynomialDrift{{-0.5, 1.0}}};  // second vanishes at 0.5
    CHECK(code_of([&] { validate_spec(g); }) == ErrorCode::InvalidSpec);
    g.regimes = {PolynomialDrift{{1.0}}, PolynomialDrift{{2.0}}};
    CHECK(code_of([&] { validate_spec(g); }) == ErrorCode::InvalidSpec);
    g.regimes = {PolynomialDrift{{1.0}}, TabulatedDrift{{0.0, 1.0}, {-1.0, -2.0}}};
    CHECK_NOTHROW(validate_spec(g));
    NeutronSpec n;
    n.scatter_rate = 0.0;
    CHECK(code_of([&] { validate_spec(n); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("reversed spec") {
    SUBCASE("symmetric rates: omega uniform, rates unchanged, drifts negated") {
        const Matrix q = Matrix::from_rows({{-2, 1, 1}, {1, -2, 1}, {1, 1, -2}});
        const PdmpSpec s = pcmp({{1, 0}, {0, 1}, {-1, -1}}, q, kUnit2);
        const PdmpSpec r = reversed_spec(s);
        for (double w : r.rates.omega()) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
        const Matrix g = r.rates.generator();
        for (std::size_t i = 0; i < 9; ++i) CHECK(g.data()[i] == doctest::Approx(q.data()[i]).epsilon(1e-14));
        CHECK(std::get<ConstantDrift>(r.regimes[2]).v == std::vector<double>{1, 1});
    }
    SUBCASE("two states are reversible") {
        const double a = 2.0, b = 5.0;
        const PdmpSpec s = pcmp({{1.0}, {-1.0}}, Matrix::from_rows({{-a, a}, {b, -b}}), kUnit);
        CHECK(s.rates.omega()[0] == doctest::Approx(b / (a + b)).epsilon(1e-14));
        const Matrix g = reversed_spec(s).rates.generator();
        CHECK(g(0, 1) == doctest::Approx(a).epsilon(1e-14));
        CHECK(g(1, 0) == doctest::Approx(b).epsilon(1e-14));
    }
    SUBCASE("involution and shared stationary law") {
        const Matrix q = Matrix::from_rows({{-2, 1, 1}, {3, -4, 1}, {1, 1, -2}});
        const PdmpSpec s = pcmp({{1, 0}, {0, 1}, {-1, -1}}, q, kUnit2);
        const PdmpSpec rr = reversed_spec(reversed_spec(s));
        CHECK(rr == s);
        CHECK(rr.rates.flux() == s.rates.flux());
        const PdmpSpec r = reversed_spec(s);
        const Vector w = stationary_rates(r.rates.generator());
        CHECK(sup_distance(w, s.rates.omega()) <= 1e-12);
        // omega_i Q_ij = omega_j Qhat_ji
        const Matrix gh = r.rates.generator();
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                if (i != j) CHECK(s.rates.omega()[i] * q(i, j) == doctest::Approx(s.rates.omega()[j] * gh(j, i)).epsilon(1e-13));
    }
}

TEST_CASE("regime occupation matches omega") {
    // Huge domain: absorption never happens over the horizon.
    const Matrix q = Matrix::from_rows({{-1, 1}, {3, -3}});
    const PdmpSpec s = pcmp({{1.0}, {-1.0}}, q, Box{{-1e6}, {1e6}});
    const std::size_t runs = 200;
    std::vector<double> frac(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        const Trajectory t = simulate(s, at(0.0), 200.0, r);
        double in0 = 0.0;
        for (std::size_t i = 0; i + 1 < t.events.size(); ++i)
            if (t.events[i].regime == 0) in0 += t.events[i + 1].time - t.events[i].time;
        frac[r] = in0 / 200.0;
    }
    double se = 0.0;
    const double mean = testing::mean_and_se(frac, se);
    CHECK(std::fabs(mean - 0.75) <= 3.0 * se);
}

TEST_CASE("survival of the +-1 PCMP matches the grid kernel") {
    const ProcessSpec spec = parse_spec(read_text(testing::config("pcmp_pm1.json")));
    // 21 cells put 0.5 at the centre of cell 10; one grid step covers the horizon.
    const GridScheme grid(spec, {21}, 1.0);
    const std::size_t samples = 100000;
    const DiscretizedKernel dk = discretize_process(spec, grid, samples, 5);
    const std::size_t state = 10 * 2 + 0;
    const double grid_survival = sum(dk.p.row(state));
    const double grid_se = std::sqrt(grid_survival * (1 - grid_survival) / samples);

    const std::size_t paths = 100000;
    std::size_t alive = 0;
    for (std::size_t i = 0; i < paths; ++i) {
        Stream rng(77, {i});
        ProcessState st = at(0.5, 0);
        alive += advance(spec, st, 1.0, rng) ? 1 : 0;
    }
    const double mc = static_cast<double>(alive) / paths;
    const double mc_se = std::sqrt(mc * (1 - mc) / paths);
    CHECK(std::fabs(mc - grid_survival) <= 3.0 * std::hypot(mc_se, grid_se));
}
