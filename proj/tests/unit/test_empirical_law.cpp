#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cmath>

#include "qsdcert/empirical_law.hpp"
#include "qsdcert/error.hpp"
#include "qsdcert/io.hpp"
#include "qsdcert/spec_json.hpp"
#include "support.hpp"

using namespace qsdcert;

namespace {

ProcessSpec pm1() { return parse_spec(read_text(testing::config("pcmp_pm1.json"))); }

}  // namespace

TEST_CASE("t = 0 returns the start histogram") {
    const ProcessSpec spec = pm1();
    const GridScheme grid(spec, {10}, 0.1);
    ProcessState st;
    st.x[0] = 0.35;
    st.regime = 1;
    LawOptions o;
    o.t = 0.0;
    o.n_paths = 100;
    const EmpiricalLaw law = estimate_conditioned_law(spec, StartSampler{st}, grid, o);
    CHECK(law.weights[3 * 2 + 1] == 1.0);
    CHECK(law.survival_probability == 1.0);
    CHECK(law.survivors == 100);

    o.n_paths = 20000;
    const EmpiricalLaw uni = estimate_conditioned_law(spec, StartSampler{}, grid, o);
    std::size_t beyond = 0;
    for (std::size_t s = 0; s < grid.n_states(); ++s)
        if (std::fabs(uni.weights[s] - 0.05) > 3.0 * uni.std_error[s]) ++beyond;
    CHECK(beyond <= 1);
}

TEST_CASE("reversal symmetry of the +-1 process") {
    // Swapping x -> 1 - x and the two regimes maps the process to itself, so the
    // law at (cell c, regime i) equals the law at (cell 19 - c, regime 1 - i).
    const ProcessSpec spec = pm1();
    const GridScheme grid(spec, {20}, 0.1);
    LawOptions o;
    o.t = 2.0;
    o.n_paths = 40000;
    o.seed = 3;
    o.resample_every = 0.5;
    const EmpiricalLaw law = estimate_conditioned_law(spec, StartSampler{}, grid, o);
    CHECK(law.survival_probability > 0.0);
    CHECK(law.survival_probability < 1.0);
    std::size_t pairs = 0, beyond = 0;
    for (std::size_t c = 0; c < 20; ++c)
        for (std::size_t i = 0; i < 2; ++i) {
            const std::size_t a = c * 2 + i, b = (19 - c) * 2 + (1 - i);
            const double se = std::hypot(law.std_error[a], law.std_error[b]);
            ++pairs;
            if (std::fabs(law.weights[a] - law.weights[b]) > 3.0 * se) ++beyond;
        }
    CHECK(beyond <= std::max<std::size_t>(1, pairs / 50));
    double total = 0.0;
    for (double w : law.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attrition is monotone") {
    const ProcessSpec spec = pm1();
    const GridScheme grid(spec, {10}, 0.1);
    LawOptions o;
    o.t = 4.0;
    o.n_paths = 5000;
    o.resample_every = 0.5;
    const EmpiricalLaw law = estimate_conditioned_law(spec, StartSampler{}, grid, o);
    REQUIRE(law.attrition.size() >= 4);
    for (std::size_t i = 1; i < law.attrition.size(); ++i) {
        CHECK(law.attrition[i].time > law.attrition[i - 1].time);
        CHECK(law.attrition[i].survival <= law.attrition[i - 1].survival);
    }
    CHECK(law.attrition.back().time == 4.0);
}

TEST_CASE("results do not depend on the thread count") {
    const ProcessSpec spec = pm1();
    const GridScheme grid(spec, {10}, 0.1);
    LawOptions o;
    o.t = 1.5;
    o.n_paths = 3000;
    o.resample_every = 0.5;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const EmpiricalLaw a = estimate_conditioned_law(spec, StartSampler{}, grid, o);
    omp_set_num_threads(3);
    const EmpiricalLaw b = estimate_conditioned_law(spec, StartSampler{}, grid, o);
    omp_set_num_threads(saved);
    CHECK(a.weights == b.weights);
    CHECK(a.std_error == b.std_error);
    CHECK(law_csv(a) == law_csv(b));
}

TEST_CASE("all paths absorbed") {
    ProcessSpec spec = parse_spec(R"({"mode":"pcmp","domain":{"lo":[0],"hi":[0.01]},
        "regimes":[{"v":[1]},{"v":[-1]}],"rates":[[-1,1],[1,-1]]})");
    const GridScheme grid(spec, {4}, 0.1);
    LawOptions o;
    o.t = 5.0;
    o.n_paths = 50;
    try {
        estimate_conditioned_law(spec, StartSampler{}, grid, o);
        FAIL("expected AllAbsorbed");
    } catch (const AllAbsorbedError& e) {
        CHECK(e.code() == ErrorCode::AllAbsorbed);
        REQUIRE_FALSE(e.curve().empty());
        CHECK(e.curve().back().alive == 0);
    }
}

TEST_CASE("csv layout") {
    const ProcessSpec spec = pm1();
    const GridScheme grid(spec, {3}, 0.1);
    LawOptions o;
    o.t = 0.0;
    o.n_paths = 10;
    const std::string csv = law_csv(estimate_conditioned_law(spec, StartSampler{}, grid, o));
    CHECK(csv.rfind("# states=6 survivors=10", 0) == 0);
    CHECK(csv.find("\ni0,regime,weight,stderr\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
}
