#include <benchmark/benchmark.h>

#include "isac/estimator.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

RadarScene bench_scene() {
    RadarScene sc;
    sc.geometry = {8, 9, 0.5};
    sc.target_angle = deg_to_rad(45.0);
    sc.block_length = 256;
    sc.doppler_hz = RadarScene::doppler_from_velocity(8.0, 2.4e9);
    sc.noise_power = 1e-3;
    sc.alpha = cplx(0.01, 0.0);
    return sc;
}

PrecodingMatrix bench_precoder() {
    Rng rng(7);
    CMatrix p(8, 5);
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) = rng.complex_normal();
    p *= std::sqrt(0.1) / p.norm();
    return PrecodingMatrix(p);
}

void BM_MonteCarloFim(benchmark::State& state) {
    const RadarScene sc = bench_scene();
    const PrecodingMatrix pm = bench_precoder();
    const Exec exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_fim(sc, pm.columns, 64, 1, exec));
}

void BM_RmseExperiment(benchmark::State& state) {
    RadarScene sc = bench_scene();
    sc.block_length = 64;
    const PrecodingMatrix pm = bench_precoder();
    const Exec exec = state.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : state) benchmark::DoNotOptimize(rmse_experiment(pm, sc, {-10.0, 0.0, 10.0}, 32, 1, {}, exec));
}

}  // namespace

// argument 0 is the serial reference, 1 the OpenMP kernel
BENCHMARK(BM_MonteCarloFim)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RmseExperiment)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
