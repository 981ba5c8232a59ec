#include <gtest/gtest.h>

#include <cmath>

#include "graphs.hpp"
#include "protonas/engine.hpp"
#include "protonas/error.hpp"

namespace protonas {
namespace {

using testing::gaussian_batch;
using testing::make_graph;
using testing::make_layer;

// Gradient tolerance pinned for every finite-difference check.
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kMaxRelativeError = 1e-4;

// Reference 2-D convolution with zero padding, written from the definition.
Tensor reference_conv(const Tensor& in, const Tensor& w, const Tensor* bias, int stride, int pad, bool depthwise) {
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - k) / stride + 1;
  Tensor out({n, o, oh, ow});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias ? (*bias)[oc] : 0.0;
          const std::size_t c_lo = depthwise ? oc : 0;
          const std::size_t c_hi = depthwise ? oc + 1 : c;
          for (std::size_t ic = c_lo; ic < c_hi; ++ic) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - pad;
                const long ix = static_cast<long>(x * stride + kx) - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                const std::size_t wi = depthwise ? ((oc * 1 + 0) * k + ky) * k + kx : ((oc * c + ic) * k + ky) * k + kx;
                acc += w[wi] * in[((b * c + ic) * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
              }
            }
          }
          out[((b * o + oc) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
  return out;
}

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

TEST(Engine, InitShapesAndDeterminism) {
  const auto g = make_graph(2, {3, 8, 8}, 4,
                            {make_layer(LayerKind::conv, {kGraphInput}, 3, 8, 3, 1, true),
                             make_layer(LayerKind::batchnorm, {0}, 8, 8),
                             make_layer(LayerKind::global_avg_pool, {1}, 8, 8),
                             make_layer(LayerKind::linear, {2}, 8, 4)});
  Rng a(9);
  Rng b(9);
  const auto pa = init_params(g, a);
  EXPECT_EQ(pa, init_params(g, b));
  EXPECT_EQ(pa.layers[0].weight.shape(), (std::vector<std::size_t>{8, 3, 3, 3}));
  EXPECT_EQ(pa.layers[0].bias.shape(), (std::vector<std::size_t>{8}));
  EXPECT_EQ(pa.layers[3].weight.shape(), (std::vector<std::size_t>{4, 8}));
  for (double v : pa.layers[0].bias.values()) EXPECT_EQ(v, 0.0);
  for (double v : pa.layers[1].weight.values()) EXPECT_EQ(v, 1.0);
  for (double v : pa.layers[1].bias.values()) EXPECT_EQ(v, 0.0);
}

TEST(Engine, HeInitStandardDeviation) {
  const auto g = make_graph(2, {3, 8, 8}, 64,
                            {make_layer(LayerKind::conv, {kGraphInput}, 3, 64, 3),
                             make_layer(LayerKind::global_avg_pool, {0}, 64, 64),
                             make_layer(LayerKind::linear, {1}, 64, 64)});
  Rng rng(2024);
  const auto p = init_params(g, rng);
  const auto& w = p.layers[0].weight;
  double mean = 0.0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(w.size()));
  const double expected = std::sqrt(2.0 / (3.0 * 9.0));
  EXPECT_NEAR(sd, expected, 0.1 * expected);
}

TEST(Engine, ScalarConvolution) {
  const auto g = make_graph(2, {1, 1, 1}, 1, {make_layer(LayerKind::conv, {kGraphInput}, 1, 1, 1)});
  ParamSet p;
  p.layers.resize(1);
  p.layers[0].weight = Tensor({1, 1, 1, 1}, 2.0);
  const auto t = forward(g, p, Tensor({1, 1, 1, 1}, 3.0));
  EXPECT_DOUBLE_EQ(t.logits[0], 6.0);
}

TEST(Engine, IdentityClassifierReproducesInput) {
  const auto g = make_graph(2, {3, 1, 1}, 3,
                            {make_layer(LayerKind::global_avg_pool, {kGraphInput}, 3, 3),
                             make_layer(LayerKind::linear, {0}, 3, 3)});
  ParamSet p;
  p.layers.resize(2);
  p.layers[1].weight = Tensor({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor batch({2, 3, 1, 1}, std::vector<double>{0.5, -1.0, 2.0, 3.0, 4.0, -5.0});
  const auto t = forward(g, p, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_DOUBLE_EQ(t.logits[i], batch[i]);
}

TEST(Engine, ZeroWeightsGiveZeroLogits) {
  Rng rng(4);
  const auto g = testing::random_small_graph(rng, 0);
  auto p = init_params(g, rng);
  for (auto& l : p.layers) l.weight.fill(0.0);
  const auto t = forward(g, p, gaussian_batch(g, 3, rng));
  for (double v : t.logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(Engine, ConvolutionMatchesReference) {
  Rng rng(31);
  for (int k : {1, 3, 5}) {
    for (int stride : {1, 2}) {
      for (bool depthwise : {false, true}) {
        const int c = 3;
        const int o = depthwise ? 3 : 4;
        const auto kind = depthwise ? LayerKind::depthwise_conv : LayerKind::conv;
        auto conv = make_layer(kind, {kGraphInput}, c, o, k, stride, true);
        const auto g = make_graph(2, {c, 7, 6}, o, {conv});
        auto p = init_params(g, rng);
        std::normal_distribution<double> dist;
        for (auto& v : p.layers[0].bias.values()) v = dist(rng);
        const auto batch = gaussian_batch(g, 2, rng);
        const auto t = forward(g, p, batch);
        expect_close(t.activations[0], reference_conv(batch, p.layers[0].weight, &p.layers[0].bias, stride,
                                                      conv.padding, depthwise),
                     1e-12);
      }
    }
  }
}

TEST(Engine, OneDimensionalConvMatchesTwoDimensionalWithUnitHeight) {
  Rng rng(8);
  const auto conv = make_layer(LayerKind::conv, {kGraphInput}, 2, 3, 5, 2, false);
  const auto g1 = make_graph(1, {2, 1, 11}, 3, {conv});
  const auto p1 = init_params(g1, rng);
  const auto batch = gaussian_batch(g1, 2, rng);
  const auto t = forward(g1, p1, batch);
  // A (O, C, k) kernel is a (O, C, 1, k) kernel whose only row is centred.
  Tensor w2({3, 2, 5, 5}, 0.0);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t x = 0; x < 5; ++x) w2[((o * 2 + c) * 5 + 2) * 5 + x] = p1.layers[0].weight[(o * 2 + c) * 5 + x];
    }
  }
  const Tensor batch4({2, 2, 1, 11}, std::vector<double>(batch.values().begin(), batch.values().end()));
  expect_close(t.activations[0], reference_conv(batch4, w2, nullptr, 2, 2, false), 1e-12);
}

TEST(Engine, ReluPatternMatchesPreActivationSign) {
  Rng rng(12);
  const auto g = testing::random_small_graph(rng, 0);  // conv, batchnorm, relu, ...
  const auto p = init_params(g, rng);
  const auto t = forward(g, p, gaussian_batch(g, 4, rng));
  const auto& pre = t.activations[1];
  const auto& pattern = t.relu_patterns[2];
  ASSERT_EQ(pattern.size(), pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) EXPECT_EQ(pattern[i] != 0, pre[i] > 0.0);
  EXPECT_TRUE(t.relu_patterns[0].empty());
}

TEST(Engine, CrossEntropyOfUniformLogits) {
  const Tensor logits({2, 4}, 0.0);
  const std::vector<int> labels{0, 3};
  EXPECT_NEAR(cross_entropy(logits, labels), std::log(4.0), 1e-15);
}

TEST(Engine, BatchShapeMismatchThrows) {
  Rng rng(1);
  const auto g = testing::random_small_graph(rng, 0);
  const auto p = init_params(g, rng);
  EXPECT_THROW(forward(g, p, Tensor({2, g.input.channels + 1u, 5, 5})), ShapeMismatch);
  const auto batch = gaussian_batch(g, 2, rng);
  EXPECT_THROW(backward(g, p, batch, std::vector<int>{0}), ShapeMismatch);
  EXPECT_THROW(backward(g, p, batch, std::vector<int>{0, 99}), ShapeMismatch);
}

TEST(Engine, GradientsMatchFiniteDifferences) {
  for (int variant = 0; variant < 10; ++variant) {
    Rng rng(static_cast<std::uint64_t>(100 + variant));
    const auto g = testing::random_small_graph(rng, variant);
    ASSERT_TRUE(validate(g).empty()) << variant;
    ASSERT_LE(g.nodes.size(), 5u);
    const auto p = init_params(g, rng);
    ASSERT_LE(p.parameter_count(), 2000u);
    const auto batch = gaussian_batch(g, 2, rng);
    const std::vector<int> labels{0, 2};
    const auto r = testing::check_gradients(g, p, batch, labels, kFiniteDifferenceStep);
    EXPECT_GT(r.parameters, 0u);
    EXPECT_LE(r.max_relative_error, kMaxRelativeError) << "variant " << variant;
  }
}

TEST(Engine, SaturatedSoftmaxHasNearZeroGradient) {
  const auto g = make_graph(2, {2, 1, 1}, 2,
                            {make_layer(LayerKind::global_avg_pool, {kGraphInput}, 2, 2),
                             make_layer(LayerKind::linear, {0}, 2, 2)});
  ParamSet p;
  p.layers.resize(2);
  p.layers[1].weight = Tensor({2, 2}, std::vector<double>{100, 0, 0, 100});
  const Tensor batch({1, 2, 1, 1}, std::vector<double>{1.0, 0.0});
  const auto rec = backward(g, p, batch, std::vector<int>{0});
  for (double v : rec.grads[1].weight.values()) EXPECT_NEAR(v, 0.0, 1e-30);
}

TEST(Engine, LossScaleDoublesGradientsExactly) {
  Rng rng(77);
  const auto g = testing::random_small_graph(rng, 4);
  const auto p = init_params(g, rng);
  const auto batch = gaussian_batch(g, 3, rng);
  const std::vector<int> labels{0, 1, 2};
  const auto one = backward(g, p, batch, labels);
  BackwardOptions two;
  two.loss_scale = 2.0;
  const auto doubled = backward(g, p, batch, labels, two);
  for (std::size_t n = 0; n < p.layers.size(); ++n) {
    for (std::size_t i = 0; i < one.grads[n].weight.size(); ++i) {
      EXPECT_EQ(doubled.grads[n].weight[i], 2.0 * one.grads[n].weight[i]);
    }
  }
}

TEST(Engine, PerSampleGradientsEqualSingleSampleBackward) {
  for (int variant = 0; variant < 10; ++variant) {
    Rng rng(static_cast<std::uint64_t>(500 + variant));
    const auto g = testing::random_small_graph(rng, variant);
    const auto p = init_params(g, rng);
    const auto batch = gaussian_batch(g, 3, rng);
    const std::vector<int> labels{2, 0, 1};
    BackwardOptions opts;
    opts.per_sample = true;
    const auto rec = backward(g, p, batch, labels, opts);
    const auto batch_rec = backward(g, p, batch, labels);
    const std::size_t per = batch.size() / 3;
    for (std::size_t s = 0; s < 3; ++s) {
      auto shape = batch.shape();
      shape[0] = 1;
      const Tensor one(shape, std::vector<double>(batch.values().begin() + static_cast<long>(s * per),
                                                  batch.values().begin() + static_cast<long>((s + 1) * per)));
      const auto single = backward(g, p, one, std::vector<int>{labels[s]});
      for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        if (!has_weights(g.nodes[n].kind)) continue;
        ASSERT_EQ(rec.per_sample_weight[n].size(), 3u);
        expect_close(rec.per_sample_weight[n][s], single.grads[n].weight, 1e-12);
      }
    }
    // The batch gradient is the mean of the per-sample gradients.
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
      if (!has_weights(g.nodes[n].kind)) continue;
      expect_close(rec.grads[n].weight, batch_rec.grads[n].weight, 1e-12);
    }
  }
}

}  // namespace
}  // namespace protonas
