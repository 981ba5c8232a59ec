#include "protonas/proxies.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "protonas/error.hpp"

namespace protonas {

namespace {

bool scored_by_gradient(LayerKind kind) noexcept {
  return kind == LayerKind::conv || kind == LayerKind::depthwise_conv || kind == LayerKind::linear;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw NumericError(std::string(name) + " score is not finite");
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigen decomposition did not converge");
  return solver.eigenvalues();
}

}  // namespace

bool ProxyScores::all_finite() const noexcept {
  const auto v = values();
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void ProxyBatchConfig::check() const {
  if (batch_size < 2) throw ConfigError("proxy.batch_size: must be >= 2");
  if (num_batches_zico < 2) throw ConfigError("proxy.num_batches_zico: must be >= 2");
  if (!(epsilon_logdet > 0.0)) throw ConfigError("proxy.epsilon_logdet: must be > 0");
  if (!(epsilon_std > 0.0)) throw ConfigError("proxy.epsilon_std: must be > 0");
  if (!(epsilon_var > 0.0)) throw ConfigError("proxy.epsilon_var: must be > 0");
}

Tensor random_batch(const ArchitectureGraph& g, int batch_size, Rng& rng) {
  std::vector<std::size_t> shape{static_cast<std::size_t>(batch_size), static_cast<std::size_t>(g.input.channels)};
  if (g.dims == 2) shape.push_back(static_cast<std::size_t>(g.input.height));
  shape.push_back(static_cast<std::size_t>(g.input.width));
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

std::vector<int> random_labels(int count, int num_classes, Rng& rng) {
  std::uniform_int_distribution<int> dist(0, num_classes - 1);
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (auto& y : labels) y = dist(rng);
  return labels;
}

// --- SNIP ---

double snip_from_gradients(const ArchitectureGraph& g, const ParamSet& params, const GradientRecord& grads) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!scored_by_gradient(g.nodes[i].kind)) continue;
    const auto& w = params.layers[i].weight;
    const auto& dw = grads.grads[i].weight;
    if (dw.empty()) continue;
    for (std::size_t k = 0; k < w.size(); ++k) total += std::abs(w[k] * dw[k]);
  }
  return total;
}

double snip(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch, std::span<const int> labels) {
  return snip_from_gradients(g, params, backward(g, params, batch, labels));
}

// --- NASWOT ---

std::size_t ActivationCode::hamming(const ActivationCode& other) const noexcept {
  std::size_t d = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) d += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
  return d;
}

std::vector<ActivationCode> activation_codes(const ForwardTrace& trace) {
  const std::size_t n = trace.batch_size();
  std::size_t units = 0;
  for (const auto& p : trace.relu_patterns) units += p.size() / std::max<std::size_t>(n, 1);

  std::vector<ActivationCode> codes(n, ActivationCode(units));
  std::size_t offset = 0;
  for (const auto& p : trace.relu_patterns) {
    if (p.empty()) continue;
    const std::size_t per_sample = p.size() / n;
    for (std::size_t s = 0; s < n; ++s) {
      const auto* row = p.data() + s * per_sample;
      for (std::size_t u = 0; u < per_sample; ++u) {
        if (row[u]) codes[s].set(offset + u);
      }
    }
    offset += per_sample;
  }
  return codes;
}

double naswot_from_codes(std::span<const ActivationCode> codes, double epsilon) {
  const auto n = static_cast<Eigen::Index>(codes.size());
  if (n == 0) return 0.0;
  const auto units = static_cast<double>(codes.front().size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = units;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = units - static_cast<double>(codes[static_cast<std::size_t>(i)].hamming(codes[static_cast<std::size_t>(j)]));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  // K is a Gram matrix, so negative eigenvalues are round-off only.
  const Eigen::VectorXd lambda = symmetric_eigenvalues(k);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(std::max(lambda(i), 0.0) + epsilon);
  return logdet;
}

double naswot(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch, double epsilon) {
  const auto codes = activation_codes(forward(g, params, batch));
  return naswot_from_codes(codes, epsilon);
}

// --- ZiCo ---

void GradientMoments::add(std::span<const double> sample_gradient) {
  if (sample_gradient.size() != mean_.size()) throw ShapeMismatch("gradient size differs from layer parameter count");
  ++count_;
  const double inv = 1.0 / static_cast<double>(count_);
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double x = sample_gradient[i];
    abs_sum_[i] += std::abs(x);
    const double delta = x - mean_[i];
    mean_[i] += delta * inv;
    m2_[i] += delta * (x - mean_[i]);
  }
}

double GradientMoments::score(double epsilon) const {
  double total = 0.0;
  if (count_ > 0) {
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double sd = std::sqrt(std::max(m2_[i] * inv, 0.0));
      total += abs_sum_[i] * inv / (sd + epsilon);
    }
  }
  return std::log(std::max(total, epsilon));
}

double zico_from_moments(std::span<const GradientMoments> layers, double epsilon) {
  double total = 0.0;
  for (const auto& l : layers) total += l.score(epsilon);
  return total;
}

namespace {

std::vector<GradientMoments> zico_layers(const ArchitectureGraph& g, const ParamSet& params) {
  std::vector<GradientMoments> layers;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (scored_by_gradient(g.nodes[i].kind)) layers.emplace_back(params.layers[i].weight.size());
  }
  return layers;
}

void accumulate_zico(const ArchitectureGraph& g, const GradientRecord& rec, std::vector<GradientMoments>& layers) {
  std::size_t slot = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!scored_by_gradient(g.nodes[i].kind)) continue;
    for (const auto& sample : rec.per_sample_weight[i]) layers[slot].add(sample.values());
    ++slot;
  }
}

}  // namespace

double zico(const ArchitectureGraph& g, const ParamSet& params, std::span<const Tensor> batches,
            std::span<const std::vector<int>> labels, double epsilon) {
  if (batches.size() != labels.size()) throw ShapeMismatch("zico: batch and label counts differ");
  auto layers = zico_layers(g, params);
  BackwardOptions opts;
  opts.per_sample = true;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    accumulate_zico(g, backward(g, params, batches[b], labels[b], opts), layers);
  }
  return zico_from_moments(layers, epsilon);
}

// --- MeCo ---

double meco_tap(const Tensor& map, double epsilon) {
  if (map.rank() < 1 || map.empty()) return 0.0;
  const auto channels = static_cast<Eigen::Index>(map.dim(0));
  const auto len = static_cast<Eigen::Index>(map.size() / map.dim(0));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(map.data(), channels, len);
  const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(len);
  Eigen::VectorXd sd(channels);
  for (Eigen::Index c = 0; c < channels; ++c) sd(c) = std::sqrt(std::max(cov(c, c), epsilon));
  Eigen::MatrixXd corr = cov.array() / (sd * sd.transpose()).array();
  corr.diagonal().setOnes();
  return symmetric_eigenvalues(corr).minCoeff();
}

double meco_from_feature_maps(std::span<const Tensor> maps, double epsilon) {
  double total = 0.0;
  for (const auto& m : maps) total += meco_tap(m, epsilon);
  return total;
}

std::vector<Tensor> tap_feature_maps(const ArchitectureGraph& g, const ForwardTrace& trace, std::size_t index) {
  std::vector<Tensor> maps;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!g.nodes[i].tap) continue;
    const Tensor& a = trace.activations[i];
    const std::size_t c = a.dim(1);
    const std::size_t plane = a.dim(2) * a.dim(3);
    const auto* begin = a.data() + index * c * plane;
    maps.emplace_back(std::vector<std::size_t>{c, plane}, std::vector<double>(begin, begin + c * plane));
  }
  return maps;
}

double meco(const ArchitectureGraph& g, const ParamSet& params, const Tensor& sample, double epsilon) {
  std::vector<std::size_t> shape{1};
  shape.insert(shape.end(), sample.shape().begin(), sample.shape().end());
  const Tensor batch(shape, std::vector<double>(sample.values().begin(), sample.values().end()));
  const auto trace = forward(g, params, batch);
  const auto maps = tap_feature_maps(g, trace, 0);
  return meco_from_feature_maps(maps, epsilon);
}

// --- ensemble ---

ProxyScores evaluate_ensemble(const ArchitectureGraph& g, const ParamSet& params, const ProxyBatchConfig& cfg,
                              Rng& rng) {
  cfg.check();
  std::vector<Tensor> batches;
  std::vector<std::vector<int>> labels;
  for (int b = 0; b < cfg.num_batches_zico; ++b) {
    batches.push_back(random_batch(g, cfg.batch_size, rng));
    labels.push_back(random_labels(cfg.batch_size, g.num_classes, rng));
  }

  ProxyScores scores;
  auto layers = zico_layers(g, params);
  BackwardOptions opts;
  opts.per_sample = true;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto trace = forward(g, params, batches[b]);
    const auto rec = backward(g, params, trace, labels[b], opts);
    accumulate_zico(g, rec, layers);
    if (b == 0) {
      // Samples do not interact in the forward pass, so sample 0 of the
      // batch equals a single-sample evaluation.
      scores.snip = snip_from_gradients(g, params, rec);
      scores.naswot = naswot_from_codes(activation_codes(trace), cfg.epsilon_logdet);
      scores.meco = meco_from_feature_maps(tap_feature_maps(g, trace, 0), cfg.epsilon_var);
    }
  }
  scores.zico = zico_from_moments(layers, cfg.epsilon_std);

  require_finite(scores.meco, "meco");
  require_finite(scores.zico, "zico");
  require_finite(scores.naswot, "naswot");
  require_finite(scores.snip, "snip");
  return scores;
}

}  // namespace protonas
