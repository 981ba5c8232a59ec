#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protonas/archspace.hpp"
#include "protonas/rng.hpp"
#include "protonas/tensor.hpp"

namespace protonas {

// Weights of one node. Convolutions hold (out, in, k, k) in 2-D and
// (out, in, k) in 1-D; depthwise convs use in = 1; linear holds (out, in).
// Batchnorm stores its scale in `weight` and shift in `bias`.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ParamSet {
  std::vector<LayerParams> layers;  // indexed by node id

  std::size_t parameter_count() const noexcept;
  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

// He-normal weights scaled by fan-in, zero biases, unit batchnorm scale.
ParamSet init_params(const ArchitectureGraph& g, Rng& rng);

struct ForwardTrace {
  Tensor input;                    // (N, C, H, W); H = 1 for 1-D graphs
  std::vector<Tensor> activations;  // per node, (N, C, H, W)
  // Per node; non-empty only for ReLU nodes: 1 where the pre-activation was > 0.
  std::vector<std::vector<std::uint8_t>> relu_patterns;
  Tensor logits;  // (N, num_classes)

  std::size_t batch_size() const noexcept { return input.empty() ? 0 : input.dim(0); }
};

// `batch` is (N, C, H, W) for 2-D graphs or (N, C, L) for 1-D graphs.
ForwardTrace forward(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch);

struct BackwardOptions {
  double loss_scale = 1.0;
  // Also record each sample's own weight gradient (loss of that sample alone).
  bool per_sample = false;
};

struct GradientRecord {
  double loss = 0.0;                // loss_scale * mean cross-entropy
  std::vector<LayerParams> grads;   // gradient of the batch loss, same layout as ParamSet
  // [node][sample] weight gradients; filled in per-sample mode for weighted nodes.
  std::vector<std::vector<Tensor>> per_sample_weight;
};

double cross_entropy(const Tensor& logits, std::span<const int> labels);

GradientRecord backward(const ArchitectureGraph& g, const ParamSet& params, const ForwardTrace& trace,
                        std::span<const int> labels, const BackwardOptions& options = {});

GradientRecord backward(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch,
                        std::span<const int> labels, const BackwardOptions& options = {});

}  // namespace protonas
