#include <benchmark/benchmark.h>

#include "qsdcert/discretize.hpp"
#include "qsdcert/io.hpp"
#include "qsdcert/matrix.hpp"
#include "qsdcert/rng.hpp"
#include "qsdcert/spec_json.hpp"

using namespace qsdcert;

namespace {

Matrix random_matrix(std::size_t n) {
    Stream rng(1, {n});
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = rng.uniform() / static_cast<double>(n);
    return m;
}

Execution mode(const benchmark::State& state) {
    return state.range(1) == 0 ? Execution::Serial : Execution::Parallel;
}

void BM_multiply(benchmark::State& state) {
    const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(multiply(a, a, mode(state)));
}

void BM_left_multiply(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n);
    const Vector v(n, 1.0 / static_cast<double>(n));
    for (auto _ : state) benchmark::DoNotOptimize(left_multiply(v, a, mode(state)));
}

void BM_trajectory_farm(benchmark::State& state) {
    const ProcessSpec spec = parse_spec(R"({"mode":"pcmp","domain":{"lo":[0],"hi":[1]},
        "regimes":[{"v":[1]},{"v":[-1]}],"rates":[[-1,1],[1,-1]]})");
    const GridScheme grid(spec, {static_cast<std::size_t>(state.range(0))}, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(discretize_process(spec, grid, 1000, 1, mode(state)));
}

}  // namespace

BENCHMARK(BM_multiply)->ArgsProduct({{64, 256, 512}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_left_multiply)->ArgsProduct({{256, 1024, 2048}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_trajectory_farm)->ArgsProduct({{50, 200}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
