// Parallel kernels vs. their serial reference implementations on a synthetic
// two-scan room map. Run with DEPTHCAL_THREADS to pin the worker count.
#include <benchmark/benchmark.h>

#include <random>

#include "depthcal/consistency_loss.hpp"
#include "depthcal/map_index.hpp"
#include "depthcal/reference.hpp"

namespace {

using namespace depthcal;

// Two viewpoints looking at three walls of a box, points jittered slightly
// off-plane so the statistics kernels see realistic covariances.
GlobalMap make_map(std::size_t points_per_wall) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.003);

  const Vec3 viewpoints[2] = {Vec3(1.5, 1.5, 1.2), Vec3(3.5, 2.5, 1.2)};
  std::vector<ScanCloud> scans(2);
  for (int k = 0; k < 2; ++k) {
    ScanCloud& scan = scans[k];
    for (std::size_t i = 0; i < points_per_wall; ++i) {
      const int wall = static_cast<int>(i % 3);
      Vec3 target;
      if (wall == 0) target = Vec3(5.0 + jitter(rng), 5.0 * u(rng), 2.4 * u(rng));
      if (wall == 1) target = Vec3(5.0 * u(rng), 5.0 + jitter(rng), 2.4 * u(rng));
      if (wall == 2) target = Vec3(5.0 * u(rng), 5.0 * u(rng), jitter(rng));
      const Vec3 beam = target - viewpoints[k];
      scan.push_back(Vec3::Zero(), beam.normalized(), beam.norm());
    }
  }

  std::vector<RigidTransform> poses(2);
  poses[0].translation = viewpoints[0];
  poses[1].translation = viewpoints[1];
  const std::vector<PoseCorrection> zero(2, PoseCorrection::Zero());
  return build_map(scans, poses, zero, BiasModel{});
}

FilterConfig bench_filters() {
  FilterConfig cfg;
  cfg.sigma_min = 0.0;  // two viewpoints only; keep the mask populated
  return cfg;
}

void BM_FreezeGrid(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    freeze_neighborhoods(map, bench_filters());
    benchmark::DoNotOptimize(map.neighbor_indices.data());
  }
}

void BM_FreezeBruteForce(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    reference::freeze_neighborhoods(map, bench_filters());
    benchmark::DoNotOptimize(map.neighbor_indices.data());
  }
}

void BM_StatsParallel(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  freeze_neighborhoods(map, bench_filters());
  for (auto _ : state) {
    compute_local_stats(map);
    benchmark::DoNotOptimize(map.stats.data());
  }
}

void BM_StatsSerial(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  freeze_neighborhoods(map, bench_filters());
  for (auto _ : state) {
    reference::compute_local_stats(map);
    benchmark::DoNotOptimize(map.stats.data());
  }
}

void BM_GradientsParallel(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  freeze_neighborhoods(map, bench_filters());
  compute_local_stats(map);
  apply_filters(map, bench_filters());
  const std::vector<PoseCorrection> zero(2, PoseCorrection::Zero());
  for (auto _ : state) {
    auto g = map_loss_gradients(map, BiasModel{}, zero, LossKind::MinEigenvalue);
    benchmark::DoNotOptimize(g.d_weights);
  }
}

void BM_GradientsSerial(benchmark::State& state) {
  GlobalMap map = make_map(static_cast<std::size_t>(state.range(0)));
  freeze_neighborhoods(map, bench_filters());
  compute_local_stats(map);
  apply_filters(map, bench_filters());
  const std::vector<PoseCorrection> zero(2, PoseCorrection::Zero());
  for (auto _ : state) {
    auto g = reference::map_loss_gradients(map, BiasModel{}, zero,
                                           LossKind::MinEigenvalue);
    benchmark::DoNotOptimize(g.d_weights);
  }
}

BENCHMARK(BM_FreezeGrid)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FreezeBruteForce)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StatsParallel)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StatsSerial)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientsParallel)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientsSerial)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
