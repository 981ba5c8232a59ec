#include "protonas/costmodel.hpp"

#include <algorithm>

#include "protonas/error.hpp"

namespace protonas {

namespace {

std::int64_t kernel_area(const LayerSpec& l, int dims) noexcept {
  const std::int64_t k = l.kernel;
  return dims == 2 ? k * k : k;
}

FeatureShape input_of(const ArchitectureGraph& g, const std::vector<FeatureShape>& shapes, int idx) {
  return idx == kGraphInput ? g.input : shapes[static_cast<std::size_t>(idx)];
}

}  // namespace

void TargetProfile::check() const {
  if (ram_max <= 0) throw ConfigError("profile.ram_max: must be > 0");
  if (rom_max <= 0) throw ConfigError("profile.rom_max: must be > 0");
  if (flops_max <= 0) throw ConfigError("profile.flops_max: must be > 0");
  if (rom_overhead < 0) throw ConfigError("profile.rom_overhead: must be >= 0");
}

std::int64_t layer_flops(const LayerSpec& l, const FeatureShape& in, const FeatureShape& out, int dims) {
  const std::int64_t out_elems = out.elements();
  const std::int64_t out_spatial = static_cast<std::int64_t>(out.height) * out.width;
  switch (l.kind) {
    case LayerKind::conv:
      return 2 * std::int64_t{l.in_channels} * l.out_channels * kernel_area(l, dims) * out_spatial +
             (l.bias ? out_elems : 0);
    case LayerKind::depthwise_conv:
      return 2 * std::int64_t{l.out_channels} * kernel_area(l, dims) * out_spatial + (l.bias ? out_elems : 0);
    case LayerKind::linear:
      return 2 * in.elements() * l.out_channels + (l.bias ? l.out_channels : 0);
    case LayerKind::batchnorm:
      return 2 * out_elems;
    case LayerKind::relu:
    case LayerKind::maxpool:
    case LayerKind::global_avg_pool:
      return out_elems;
    case LayerKind::add:
      return out_elems * static_cast<std::int64_t>(std::max<std::size_t>(l.inputs.size(), 2) - 1);
    case LayerKind::concat:
      return 0;
  }
  return 0;
}

std::int64_t count_flops(const ArchitectureGraph& g) {
  const auto shapes = infer_shapes(g);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& l = g.nodes[i];
    total += layer_flops(l, input_of(g, shapes, l.inputs.front()), shapes[i], g.dims);
  }
  return total;
}

std::int64_t layer_rom(const LayerSpec& l, int dims, const QuantScheme& q) {
  const std::int64_t out = l.out_channels;
  std::int64_t weights = 0;
  switch (l.kind) {
    case LayerKind::conv:
      weights = std::int64_t{l.in_channels} * out * kernel_area(l, dims);
      break;
    case LayerKind::depthwise_conv:
      weights = out * kernel_area(l, dims);
      break;
    case LayerKind::linear:
      weights = std::int64_t{l.in_channels} * out;
      break;
    case LayerKind::batchnorm:
      // Folded into a per-channel int32 shift.
      return out * q.bias_bytes;
    default:
      return 0;
  }
  return weights * q.weight_bytes + out * q.channel_meta_bytes + (l.bias ? out * q.bias_bytes : 0);
}

std::int64_t estimate_rom(const ArchitectureGraph& g, const QuantScheme& q) {
  std::int64_t total = q.overhead;
  for (const auto& l : g.nodes) total += layer_rom(l, g.dims, q);
  return total;
}

std::vector<std::int64_t> ram_timeline(const ArchitectureGraph& g, int bytes_per_element) {
  const auto shapes = infer_shapes(g);
  const auto n = static_cast<int>(g.nodes.size());
  // last_use[j + 1] is the last step reading buffer j (-1 is the graph input).
  std::vector<int> last_use(g.nodes.size() + 1);
  for (int i = 0; i < n; ++i) last_use[static_cast<std::size_t>(i + 1)] = i;
  for (int i = 0; i < n; ++i) {
    for (int src : g.nodes[static_cast<std::size_t>(i)].inputs) {
      auto& slot = last_use[static_cast<std::size_t>(src + 1)];
      slot = std::max(slot, i);
    }
  }
  auto bytes = [&](int j) {
    return input_of(g, shapes, j).elements() * bytes_per_element;
  };

  std::vector<std::int64_t> timeline(g.nodes.size());
  std::int64_t live = bytes(kGraphInput);
  for (int i = 0; i < n; ++i) {
    live += bytes(i);
    timeline[static_cast<std::size_t>(i)] = live;
    for (int j = -1; j <= i; ++j) {
      if (last_use[static_cast<std::size_t>(j + 1)] == i) live -= bytes(j);
    }
  }
  return timeline;
}

std::int64_t estimate_ram(const ArchitectureGraph& g, int bytes_per_element) {
  const auto timeline = ram_timeline(g, bytes_per_element);
  if (timeline.empty()) return g.input.elements() * bytes_per_element;
  return *std::max_element(timeline.begin(), timeline.end());
}

CostEstimate estimate_costs(const ArchitectureGraph& g, const TargetProfile& profile) {
  QuantScheme q;
  q.overhead = profile.rom_overhead;
  return {count_flops(g), estimate_rom(g, q), estimate_ram(g)};
}

Feasibility check(const CostEstimate& c, const TargetProfile& t) noexcept {
  auto excess = [](std::int64_t value, std::int64_t limit) {
    return value > limit ? static_cast<double>(value - limit) / static_cast<double>(limit) : 0.0;
  };
  Feasibility f;
  f.violation = excess(c.flops, t.flops_max) + excess(c.rom_bytes, t.rom_max) + excess(c.ram_bytes, t.ram_max);
  f.feasible = c.flops <= t.flops_max && c.rom_bytes <= t.rom_max && c.ram_bytes <= t.ram_max;
  return f;
}

}  // namespace protonas
