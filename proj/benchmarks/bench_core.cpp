#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dym/alignment.hpp"
#include "dym/ransac.hpp"

namespace {

std::vector<dym::Correspondence3D> synthetic_pairs(int n, double outlier_frac,
                                                   std::uint64_t seed) {
  const dym::Pose truth =
      dym::Pose::from_axis_angle({0.2, 1.0, 0.1}, 0.3, {0.5, 0.0, 1.0});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_real_distribution<double> junk(-10.0, 10.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<dym::Correspondence3D> pairs(n);
  for (int i = 0; i < n; ++i) {
    pairs[i].track_id = i;
    pairs[i].p_prev = {coord(rng), coord(rng), coord(rng) + 5.0};
    pairs[i].p_curr = u01(rng) < outlier_frac
                          ? Eigen::Vector3d(junk(rng), junk(rng), junk(rng))
                          : truth.apply(pairs[i].p_prev);
  }
  return pairs;
}

void BM_RigidAlignment(benchmark::State& state) {
  const auto pairs = synthetic_pairs(static_cast<int>(state.range(0)), 0.0, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dym::estimate_rigid_alignment(pairs));
  }
}
BENCHMARK(BM_RigidAlignment)->Arg(10)->Arg(100)->Arg(1000);

void BM_RansacRigid(benchmark::State& state) {
  const auto pairs = synthetic_pairs(static_cast<int>(state.range(0)), 0.3, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dym::ransac_rigid(pairs, 0.05, 500, 7));
  }
}
BENCHMARK(BM_RansacRigid)->Arg(100)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
