#include <benchmark/benchmark.h>

#include "protonas/archspace.hpp"
#include "protonas/costmodel.hpp"

namespace protonas {
namespace {

ArchitectureGraph resnet_candidate() {
  SearchSpaceDef space;
  space.baseline_pool = {"resnet"};
  HyperparamVector x;
  x.group_depth = {3, 3, 3, 3};
  return decode(x, space, builtin_templates(), TaskShape::image(3, 128, 128, 10));
}

void BM_EstimateCosts(benchmark::State& state) {
  const auto g = resnet_candidate();
  const TargetProfile profile;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_costs(g, profile));
}
BENCHMARK(BM_EstimateCosts);

void BM_Decode(benchmark::State& state) {
  SearchSpaceDef space;
  space.baseline_pool = {"mbednet2d", "mobilenetv2", "resnet", "squeezenet"};
  Rng rng(1);
  const auto task = TaskShape::image(3, 128, 128, 10);
  for (auto _ : state) {
    const auto x = sample(rng, space);
    benchmark::DoNotOptimize(apply_static_pruning(decode(x, space, builtin_templates(), task), x.pruning_sparsity));
  }
}
BENCHMARK(BM_Decode);

}  // namespace
}  // namespace protonas
