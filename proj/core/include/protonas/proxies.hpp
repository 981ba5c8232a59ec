#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "protonas/archspace.hpp"
#include "protonas/engine.hpp"
#include "protonas/rng.hpp"
#include "protonas/tensor.hpp"

namespace protonas {

struct ProxyScores {
  double meco = 0.0;
  double zico = 0.0;
  double naswot = 0.0;
  double snip = 0.0;

  std::array<double, 4> values() const noexcept { return {meco, zico, naswot, snip}; }
  bool all_finite() const noexcept;
  friend bool operator==(const ProxyScores&, const ProxyScores&) = default;
};

struct ProxyBatchConfig {
  int batch_size = 8;
  int num_batches_zico = 2;
  double epsilon_logdet = 1e-6;
  double epsilon_std = 1e-6;
  double epsilon_var = 1e-6;

  // Throws ConfigError.
  void check() const;
  friend bool operator==(const ProxyBatchConfig&, const ProxyBatchConfig&) = default;
};

// Standard-normal batch shaped for the graph input and uniform labels.
Tensor random_batch(const ArchitectureGraph& g, int batch_size, Rng& rng);
std::vector<int> random_labels(int count, int num_classes, Rng& rng);

// Sum of |dL/dw * w| over conv, depthwise and linear weights.
double snip(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch, std::span<const int> labels);
double snip_from_gradients(const ArchitectureGraph& g, const ParamSet& params, const GradientRecord& grads);

// Binary activation codes, one bit per ReLU unit.
class ActivationCode {
 public:
  ActivationCode() = default;
  explicit ActivationCode(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

  void set(std::size_t i) noexcept { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const noexcept { return (words_[i / 64] >> (i % 64)) & 1u; }
  std::size_t size() const noexcept { return bits_; }
  std::size_t hamming(const ActivationCode& other) const noexcept;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

std::vector<ActivationCode> activation_codes(const ForwardTrace& trace);
double naswot_from_codes(std::span<const ActivationCode> codes, double epsilon);
double naswot(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch, double epsilon = 1e-6);

// Running per-parameter statistics of per-sample gradients for one layer.
class GradientMoments {
 public:
  explicit GradientMoments(std::size_t parameters = 0) : abs_sum_(parameters), mean_(parameters), m2_(parameters) {}

  void add(std::span<const double> sample_gradient);
  std::size_t count() const noexcept { return count_; }
  std::size_t parameters() const noexcept { return mean_.size(); }
  // log(max(sum_theta mean|g| / (std(g) + epsilon), epsilon)); population std.
  double score(double epsilon) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> abs_sum_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

double zico_from_moments(std::span<const GradientMoments> layers, double epsilon);
double zico(const ArchitectureGraph& g, const ParamSet& params, std::span<const Tensor> batches,
            std::span<const std::vector<int>> labels, double epsilon = 1e-6);

// Minimum eigenvalue of the channel correlation matrix of one feature map.
// `map` is (C, ...) with each channel flattened over the remaining axes.
double meco_tap(const Tensor& map, double epsilon);
double meco_from_feature_maps(std::span<const Tensor> maps, double epsilon);
// Feature maps of sample `index` at every tap node of a trace, shaped (C, H*W).
std::vector<Tensor> tap_feature_maps(const ArchitectureGraph& g, const ForwardTrace& trace, std::size_t index = 0);
double meco(const ArchitectureGraph& g, const ParamSet& params, const Tensor& sample, double epsilon = 1e-6);

// All four scores from shared batches drawn from `rng`. Throws NumericError
// if any score is not finite.
ProxyScores evaluate_ensemble(const ArchitectureGraph& g, const ParamSet& params, const ProxyBatchConfig& cfg,
                              Rng& rng);

}  // namespace protonas
