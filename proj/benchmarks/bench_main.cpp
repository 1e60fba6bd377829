#include <random>

#include <benchmark/benchmark.h>

#include "qpe/nash_moser.hpp"

using namespace qpe;

namespace {

Lattice lattice_for(const benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    return Lattice(2, n, n);
}

FourierField forcing(const Lattice& lat) {
    Mode a, b;
    a.l[0] = 1;
    a.j = {1, 1, 0};
    b.l[1] = 1;
    b.j = {0, 1, -1};
    return trig_field(lat, 3, {{a, {0.0, 0.0, 1.0}}, {b, {1.0, 0.0, 0.0}}}, true);
}

void BM_SobolevNorm(benchmark::State& state) {
    auto lat = lattice_for(state);
    std::mt19937_64 rng(1);
    auto f = random_field(lat, 3, 8.0, Parity::odd, rng);
    for (auto _ : state) benchmark::DoNotOptimize(sobolev_norm(f, 2.0));
}
BENCHMARK(BM_SobolevNorm)->Arg(4)->Arg(6)->Arg(8);

void BM_DirectionalDerivative(benchmark::State& state) {
    auto lat = lattice_for(state);
    std::mt19937_64 rng(2);
    auto a = random_field(lat, 3, 8.0, Parity::even, rng, true, true);
    auto h = random_field(lat, 3, 8.0, Parity::odd, rng);
    for (auto _ : state) benchmark::DoNotOptimize(dir_deriv(a, h));
}
BENCHMARK(BM_DirectionalDerivative)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Residual(benchmark::State& state) {
    auto lat = lattice_for(state);
    auto prob = EulerProblem::make(lat, 1e-3, golden_parameter(2), forcing(lat));
    auto v = forcing(lat);
    v *= 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(residual(v, prob));
}
BENCHMARK(BM_Residual)->Arg(4)->Arg(6);

void BM_BlockCompose(benchmark::State& state) {
    auto lat = lattice_for(state);
    auto prob = EulerProblem::make(lat, 1e-3, golden_parameter(2), forcing(lat));
    auto lin = build_linearized(forcing(lat), prob);
    for (auto _ : state) benchmark::DoNotOptimize(compose(lin.perturbation, lin.perturbation));
}
BENCHMARK(BM_BlockCompose)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_KamStep(benchmark::State& state) {
    auto lat = lattice_for(state);
    auto lam = golden_parameter(2);
    auto cfg = DiophantineConfig::practical(2, 1e-3);
    auto prob = EulerProblem::make(lat, 1e-3, lam, forcing(lat));
    auto lin = build_linearized(forcing(lat), prob);
    auto R = restrict_block(lin.perturbation, Subspace::perp, Subspace::perp);
    auto Q0 = block_diagonal(R);
    auto s0 = kam_initial_state(Q0, R - Q0);
    for (auto _ : state) benchmark::DoNotOptimize(kam_step(s0, lam, cfg, 4.0));
}
BENCHMARK(BM_KamStep)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MeasureScan(benchmark::State& state) {
    Lattice lat(2, 3, 3);
    ParameterBox box{std::vector<double>(5, 1.0), std::vector<double>(5, 2.0)};
    auto cfg = DiophantineConfig::practical(2, 0.02);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(measure_scan(box, {0.02, 0.05}, n, Predicate::full, cfg, lat, 3));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_MeasureScan)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
