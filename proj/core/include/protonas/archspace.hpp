#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protonas/rng.hpp"
#include "protonas/templates.hpp"

namespace protonas {

inline constexpr int kGroupCount = 4;

struct KernelStride {
  int kernel = 3;
  int stride = 1;
  friend bool operator==(const KernelStride&, const KernelStride&) = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  double span() const noexcept { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SearchSpaceDef {
  std::vector<std::string> baseline_pool;
  std::vector<int> depth_values{0, 1, 2, 3};
  std::vector<KernelStride> kernel_stride_values{{3, 2}, {3, 1}, {5, 2}, {5, 1}, {7, 2}, {7, 1}};
  Interval width_range{0.1, 1.0};
  Interval sparsity_range{0.1, 0.9};

  static constexpr int group_count = kGroupCount;

  // Throws ConfigError describing the first invalid field.
  void check() const;

  friend bool operator==(const SearchSpaceDef&, const SearchSpaceDef&) = default;
};

// One point of the search space. Categorical genes hold indices into the
// corresponding SearchSpaceDef list, except group_depth which holds the depth
// value itself.
struct HyperparamVector {
  static constexpr std::size_t gene_count = 1 + kGroupCount + kGroupCount + 1 + kGroupCount;

  int architecture = 0;
  std::array<int, kGroupCount> group_depth{};
  std::array<int, kGroupCount> kernel_stride{};
  double width_multiplier = 1.0;
  std::array<double, kGroupCount> pruning_sparsity{0.1, 0.1, 0.1, 0.1};

  std::array<double, gene_count> encode() const noexcept;
  static HyperparamVector decode_genes(std::span<const double> genes);

  friend bool operator==(const HyperparamVector&, const HyperparamVector&) = default;
};

bool in_range(const HyperparamVector& x, const SearchSpaceDef& space) noexcept;

struct TaskShape {
  int dims = 2;  // 1: (channels, length) with length in `width`; 2: (channels, height, width)
  int channels = 3;
  int height = 128;
  int width = 128;
  int num_classes = 10;

  static TaskShape image(int channels, int height, int width, int num_classes) {
    return {2, channels, height, width, num_classes};
  }
  static TaskShape series(int channels, int length, int num_classes) {
    return {1, channels, 1, length, num_classes};
  }

  friend bool operator==(const TaskShape&, const TaskShape&) = default;
};

enum class LayerKind { conv, depthwise_conv, linear, relu, batchnorm, maxpool, global_avg_pool, add, concat };

std::string_view to_string(LayerKind kind) noexcept;
bool has_weights(LayerKind kind) noexcept;

inline constexpr int kGraphInput = -1;

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::vector<int> inputs;  // producer node indices, kGraphInput for the graph input
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  bool bias = false;

  int group = -1;       // 0..3 inside the backbone groups, -1 for stem/classifier
  int superblock = -1;  // global superblock ordinal, -1 outside superblocks
  bool prunable = false;
  bool tap = false;     // superblock output
  int nominal_out = 0;  // output channels at width 1.0 (convs only)
  std::string name;
};

struct FeatureShape {
  int channels = 0;
  int height = 1;
  int width = 1;

  long long elements() const noexcept { return static_cast<long long>(channels) * height * width; }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

struct ArchitectureGraph {
  std::string template_id;
  int dims = 2;
  FeatureShape input;
  int num_classes = 10;
  std::vector<LayerSpec> nodes;

  std::size_t size() const noexcept { return nodes.size(); }
  int superblock_count() const noexcept;
};

// Output shape of every node, in node order. Assumes a validated graph;
// throws ShapeMismatch/ShapeCollapse on inconsistencies.
std::vector<FeatureShape> infer_shapes(const ArchitectureGraph& g);

// Consumers of each node's output.
std::vector<std::vector<int>> consumers(const ArchitectureGraph& g);

HyperparamVector sample(Rng& rng, const SearchSpaceDef& space);

// Scaled channel count for a nominal (width 1.0) count.
int scale_channels(int nominal, double width_multiplier) noexcept;

// Channel count after removing floor(sparsity * c) channels, never below 1.
int pruned_channels(int channels, double sparsity) noexcept;

ArchitectureGraph decode(const HyperparamVector& x, const SearchSpaceDef& space,
                         const TemplateLibrary& templates, const TaskShape& task);

ArchitectureGraph apply_static_pruning(const ArchitectureGraph& g,
                                       const std::array<double, kGroupCount>& sparsity);

// Empty when the graph satisfies every structural invariant.
std::vector<std::string> validate(const ArchitectureGraph& g);

}  // namespace protonas
