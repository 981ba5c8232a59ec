#include <benchmark/benchmark.h>

#include "protonas/archspace.hpp"
#include "protonas/engine.hpp"
#include "protonas/proxies.hpp"

namespace protonas {
namespace {

ArchitectureGraph candidate(const std::string& id, const TaskShape& task) {
  SearchSpaceDef space;
  space.baseline_pool = {id};
  HyperparamVector x;
  x.group_depth = {1, 1, 1, 1};
  x.kernel_stride = {0, 1, 0, 1};
  x.width_multiplier = 0.5;
  return apply_static_pruning(decode(x, space, builtin_templates(), task), x.pruning_sparsity);
}

void BM_ForwardBackward(benchmark::State& state, const std::string& id, TaskShape task) {
  const auto g = candidate(id, task);
  Rng rng(1);
  const auto params = init_params(g, rng);
  const auto batch = random_batch(g, 8, rng);
  const auto labels = random_labels(8, g.num_classes, rng);
  for (auto _ : state) benchmark::DoNotOptimize(backward(g, params, batch, labels).loss);
}
BENCHMARK_CAPTURE(BM_ForwardBackward, mbednet2d_32, std::string("mbednet2d"), TaskShape::image(3, 32, 32, 10))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ForwardBackward, mbednet1d_128, std::string("mbednet1d"), TaskShape::series(3, 128, 10))
    ->Unit(benchmark::kMillisecond);

void BM_Ensemble(benchmark::State& state) {
  const auto g = candidate("mbednet2d", TaskShape::image(3, 32, 32, 10));
  Rng rng(2);
  const auto params = init_params(g, rng);
  const ProxyBatchConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_ensemble(g, params, cfg, rng));
}
BENCHMARK(BM_Ensemble)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace protonas
