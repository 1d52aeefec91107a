#include <benchmark/benchmark.h>

#include "cme/boundary.hpp"

namespace {

void bm_cantor_distance(benchmark::State& state) {
  auto e = cme::BoundarySet::cantor_four_corners(6, 2);
  cme::Rng rng(11);
  for (auto _ : state) {
    cme::Vec p{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5), 0};
    benchmark::DoNotOptimize(e.distance(p));
  }
}
BENCHMARK(bm_cantor_distance);

void bm_cantor_ball_mass(benchmark::State& state) {
  auto e = cme::BoundarySet::cantor_four_corners(6, 2);
  cme::Rng rng(12);
  for (auto _ : state) {
    cme::Vec p{rng.uniform(0, 1), rng.uniform(0, 1), 0};
    benchmark::DoNotOptimize(e.ball_mass(p, 0.1));
  }
}
BENCHMARK(bm_cantor_ball_mass);

}  // namespace

BENCHMARK_MAIN();
