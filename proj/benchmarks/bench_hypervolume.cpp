#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "protonas/hvss.hpp"

namespace protonas {
namespace {

std::vector<ObjectivePoint> simplex_front(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ObjectivePoint> pts(n, ObjectivePoint(d));
  for (auto& p : pts) {
    double s = 0.0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
  }
  return pts;
}

void BM_Hypervolume5D(benchmark::State& state) {
  const auto pts = simplex_front(static_cast<std::size_t>(state.range(0)), 5, 1);
  const auto ref = uniform_reference(5);
  for (auto _ : state) benchmark::DoNotOptimize(hypervolume(pts, ref));
}
BENCHMARK(BM_Hypervolume5D)->Arg(5)->Arg(20)->Arg(50);

void BM_Repair(benchmark::State& state) {
  const auto pts = simplex_front(40, 5, 2);
  const auto ref = uniform_reference(5);
  SubsetGene g(pts.size(), 5);
  for (std::size_t i = 0; i < pts.size(); i += 3) g.set(i);
  for (auto _ : state) benchmark::DoNotOptimize(repair(g, pts, ref));
}
BENCHMARK(BM_Repair);

void BM_SelectSubset(benchmark::State& state) {
  const auto pts = simplex_front(30, 5, 3);
  HssConfig cfg;
  cfg.population = 200;
  cfg.stagnation = 50;
  for (auto _ : state) benchmark::DoNotOptimize(select_subset(pts, 5, cfg));
}
BENCHMARK(BM_SelectSubset)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace protonas
