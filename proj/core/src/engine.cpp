#include "protonas/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protonas/error.hpp"

namespace protonas {

namespace {

constexpr double kBatchnormEps = 1e-5;

struct Dims {
  std::size_t n = 0, c = 0, h = 1, w = 1;
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample() const noexcept { return c * h * w; }
};

Dims dims_of(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)}; }

Tensor make4(const Dims& d, double fill = 0.0) { return Tensor({d.n, d.c, d.h, d.w}, fill); }

struct ConvGeometry {
  int kh = 1, kw = 1, stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;
  int in_h = 1, in_w = 1, out_h = 1, out_w = 1;
};

ConvGeometry geometry(const LayerSpec& l, int graph_dims, const Dims& in) {
  ConvGeometry g;
  g.kw = l.kernel;
  g.stride_w = l.stride;
  g.pad_w = l.padding;
  if (graph_dims == 2) {
    g.kh = l.kernel;
    g.stride_h = l.stride;
    g.pad_h = l.padding;
  }
  g.in_h = static_cast<int>(in.h);
  g.in_w = static_cast<int>(in.w);
  g.out_h = (g.in_h + 2 * g.pad_h - g.kh) / g.stride_h + 1;
  g.out_w = (g.in_w + 2 * g.pad_w - g.kw) / g.stride_w + 1;
  return g;
}

// Output columns [lo, hi) whose input column ox*stride + offset is in bounds.
inline void column_range(int offset, int stride, int in_w, int out_w, int& lo, int& hi) noexcept {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = in_w - 1 - offset;
  hi = last < 0 ? 0 : std::min(out_w, last / stride + 1);
}

std::vector<std::size_t> weight_shape(const LayerSpec& l, int graph_dims) {
  const auto out = static_cast<std::size_t>(l.out_channels);
  const auto in = static_cast<std::size_t>(l.kind == LayerKind::depthwise_conv ? 1 : l.in_channels);
  const auto k = static_cast<std::size_t>(l.kernel);
  if (l.kind == LayerKind::linear) return {out, static_cast<std::size_t>(l.in_channels)};
  if (graph_dims == 2) return {out, in, k, k};
  return {out, in, k};
}

// Direct convolution. For depthwise layers in_channels == out_channels and
// each output channel reads only its own input channel.
void conv_forward(const double* in, const double* weight, const double* bias, double* out, const Dims& din,
                  int out_channels, bool depthwise, const ConvGeometry& g) {
  const auto in_plane = din.plane();
  const auto out_plane = static_cast<std::size_t>(g.out_h) * static_cast<std::size_t>(g.out_w);
  const int in_channels = static_cast<int>(din.c);
  const int taps = g.kh * g.kw;
  for (std::size_t n = 0; n < din.n; ++n) {
    for (int co = 0; co < out_channels; ++co) {
      double* dst = out + (n * static_cast<std::size_t>(out_channels) + static_cast<std::size_t>(co)) * out_plane;
      std::fill(dst, dst + out_plane, bias ? bias[co] : 0.0);
      const int ci_begin = depthwise ? co : 0;
      const int ci_end = depthwise ? co + 1 : in_channels;
      for (int ci = ci_begin; ci < ci_end; ++ci) {
        const double* src = in + (n * din.c + static_cast<std::size_t>(ci)) * in_plane;
        const double* w = weight + (depthwise ? co : co * in_channels + ci) * taps;
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride_h + ky - g.pad_h;
            if (iy < 0 || iy >= g.in_h) continue;
            const double* row_in = src + iy * g.in_w;
            double* row_out = dst + oy * g.out_w;
            for (int kx = 0; kx < g.kw; ++kx) {
              const double wv = w[ky * g.kw + kx];
              const int offset = kx - g.pad_w;
              int lo = 0, hi = 0;
              column_range(offset, g.stride_w, g.in_w, g.out_w, lo, hi);
              if (g.stride_w == 1) {
                const double* r = row_in + offset;
                for (int ox = lo; ox < hi; ++ox) row_out[ox] += wv * r[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox) row_out[ox] += wv * row_in[ox * g.stride_w + offset];
              }
            }
          }
        }
      }
    }
  }
}

// Accumulates input gradients of a convolution into `din_grad`.
void conv_backward_input(const double* dout, const double* weight, double* din_grad, const Dims& din,
                         int out_channels, bool depthwise, const ConvGeometry& g) {
  const auto in_plane = din.plane();
  const auto out_plane = static_cast<std::size_t>(g.out_h) * static_cast<std::size_t>(g.out_w);
  const int in_channels = static_cast<int>(din.c);
  const int taps = g.kh * g.kw;
  for (std::size_t n = 0; n < din.n; ++n) {
    for (int co = 0; co < out_channels; ++co) {
      const double* src = dout + (n * static_cast<std::size_t>(out_channels) + static_cast<std::size_t>(co)) * out_plane;
      const int ci_begin = depthwise ? co : 0;
      const int ci_end = depthwise ? co + 1 : in_channels;
      for (int ci = ci_begin; ci < ci_end; ++ci) {
        double* dst = din_grad + (n * din.c + static_cast<std::size_t>(ci)) * in_plane;
        const double* w = weight + (depthwise ? co : co * in_channels + ci) * taps;
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride_h + ky - g.pad_h;
            if (iy < 0 || iy >= g.in_h) continue;
            double* row_in = dst + iy * g.in_w;
            const double* row_out = src + oy * g.out_w;
            for (int kx = 0; kx < g.kw; ++kx) {
              const double wv = w[ky * g.kw + kx];
              const int offset = kx - g.pad_w;
              int lo = 0, hi = 0;
              column_range(offset, g.stride_w, g.in_w, g.out_w, lo, hi);
              for (int ox = lo; ox < hi; ++ox) row_in[ox * g.stride_w + offset] += wv * row_out[ox];
            }
          }
        }
      }
    }
  }
}

// Accumulates the weight gradient of sample `n` into `dw`.
void conv_backward_weight(const double* dout, const double* in, double* dw, const Dims& din, std::size_t n,
                          int out_channels, bool depthwise, const ConvGeometry& g) {
  const auto in_plane = din.plane();
  const auto out_plane = static_cast<std::size_t>(g.out_h) * static_cast<std::size_t>(g.out_w);
  const int in_channels = static_cast<int>(din.c);
  const int taps = g.kh * g.kw;
  for (int co = 0; co < out_channels; ++co) {
    const double* grad = dout + (n * static_cast<std::size_t>(out_channels) + static_cast<std::size_t>(co)) * out_plane;
    const int ci_begin = depthwise ? co : 0;
    const int ci_end = depthwise ? co + 1 : in_channels;
    for (int ci = ci_begin; ci < ci_end; ++ci) {
      const double* src = in + (n * din.c + static_cast<std::size_t>(ci)) * in_plane;
      double* w = dw + (depthwise ? co : co * in_channels + ci) * taps;
      for (int ky = 0; ky < g.kh; ++ky) {
        for (int kx = 0; kx < g.kw; ++kx) {
          const int offset = kx - g.pad_w;
          int lo = 0, hi = 0;
          column_range(offset, g.stride_w, g.in_w, g.out_w, lo, hi);
          double acc = 0.0;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride_h + ky - g.pad_h;
            if (iy < 0 || iy >= g.in_h) continue;
            const double* row_in = src + iy * g.in_w;
            const double* row_out = grad + oy * g.out_w;
            for (int ox = lo; ox < hi; ++ox) acc += row_out[ox] * row_in[ox * g.stride_w + offset];
          }
          w[ky * g.kw + kx] += acc;
        }
      }
    }
  }
}

void maxpool_forward(const Tensor& in, Tensor& out, const ConvGeometry& g) {
  const auto d = dims_of(in);
  const auto out_plane = static_cast<std::size_t>(g.out_h * g.out_w);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const double* src = in.data() + nc * d.plane();
    double* dst = out.data() + nc * out_plane;
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.stride_h + ky - g.pad_h;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.stride_w + kx - g.pad_w;
            if (ix < 0 || ix >= g.in_w) continue;
            best = std::max(best, src[iy * g.in_w + ix]);
          }
        }
        dst[oy * g.out_w + ox] = best;
      }
    }
  }
}

void maxpool_backward(const Tensor& in, const Tensor& dout, Tensor& din, const ConvGeometry& g) {
  const auto d = dims_of(in);
  const auto out_plane = static_cast<std::size_t>(g.out_h * g.out_w);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const double* src = in.data() + nc * d.plane();
    const double* grad = dout.data() + nc * out_plane;
    double* dst = din.data() + nc * d.plane();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = -1;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.stride_h + ky - g.pad_h;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.stride_w + kx - g.pad_w;
            if (ix < 0 || ix >= g.in_w) continue;
            if (src[iy * g.in_w + ix] > best) {
              best = src[iy * g.in_w + ix];
              arg = iy * g.in_w + ix;
            }
          }
        }
        if (arg >= 0) dst[arg] += grad[oy * g.out_w + ox];
      }
    }
  }
}

Tensor as_4d(const ArchitectureGraph& g, const Tensor& batch) {
  const std::size_t expected_rank = g.dims == 2 ? 4 : 3;
  if (batch.rank() != expected_rank) throw ShapeMismatch("batch rank does not match graph dimensionality");
  const std::size_t n = batch.dim(0);
  const std::size_t c = batch.dim(1);
  const std::size_t h = g.dims == 2 ? batch.dim(2) : 1;
  const std::size_t w = batch.dim(expected_rank - 1);
  if (n == 0) throw ShapeMismatch("batch must contain at least one sample");
  if (c != static_cast<std::size_t>(g.input.channels) || h != static_cast<std::size_t>(g.input.height) ||
      w != static_cast<std::size_t>(g.input.width)) {
    throw ShapeMismatch("batch sample shape does not match graph input shape");
  }
  return Tensor({n, c, h, w}, std::vector<double>(batch.values().begin(), batch.values().end()));
}

const Tensor& producer_output(const ForwardTrace& t, int idx) {
  return idx == kGraphInput ? t.input : t.activations[static_cast<std::size_t>(idx)];
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = logits;
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = p.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - m);
      sum += row[j];
    }
    for (std::size_t j = 0; j < k; ++j) row[j] /= sum;
  }
  return p;
}

void check_labels(const Tensor& logits, std::span<const int> labels) {
  if (labels.size() != logits.dim(0)) throw ShapeMismatch("label count does not match batch size");
  const auto k = static_cast<int>(logits.dim(1));
  for (int y : labels) {
    if (y < 0 || y >= k) throw ShapeMismatch("label outside the class range");
  }
}

}  // namespace

std::size_t ParamSet::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  return total;
}

ParamSet init_params(const ArchitectureGraph& g, Rng& rng) {
  ParamSet params;
  params.layers.resize(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    auto& p = params.layers[i];
    if (has_weights(node.kind)) {
      const auto shape = weight_shape(node, g.dims);
      const std::size_t fan_in = shape_product(std::span(shape).subspan(1));
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      p.weight = Tensor(shape);
      for (auto& v : p.weight.values()) v = dist(rng);
      if (node.bias) p.bias = Tensor({static_cast<std::size_t>(node.out_channels)}, 0.0);
    } else if (node.kind == LayerKind::batchnorm) {
      p.weight = Tensor({static_cast<std::size_t>(node.out_channels)}, 1.0);
      p.bias = Tensor({static_cast<std::size_t>(node.out_channels)}, 0.0);
    }
  }
  return params;
}

ForwardTrace forward(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch) {
  if (params.layers.size() != g.nodes.size()) throw ShapeMismatch("parameter set does not match graph");
  ForwardTrace t;
  t.input = as_4d(g, batch);
  t.activations.resize(g.nodes.size());
  t.relu_patterns.resize(g.nodes.size());

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    const auto& p = params.layers[i];
    const Tensor& in = producer_output(t, node.inputs.front());
    const Dims din = dims_of(in);
    if (node.kind != LayerKind::linear && node.kind != LayerKind::concat &&
        din.c != static_cast<std::size_t>(node.in_channels)) {
      throw ShapeMismatch(node.name + ": input channels differ from layer spec");
    }
    Tensor& out = t.activations[i];

    switch (node.kind) {
      case LayerKind::conv:
      case LayerKind::depthwise_conv: {
        const auto geo = geometry(node, g.dims, din);
        out = make4({din.n, static_cast<std::size_t>(node.out_channels), static_cast<std::size_t>(geo.out_h),
                     static_cast<std::size_t>(geo.out_w)});
        conv_forward(in.data(), p.weight.data(), p.bias.empty() ? nullptr : p.bias.data(), out.data(), din,
                     node.out_channels, node.kind == LayerKind::depthwise_conv, geo);
        break;
      }
      case LayerKind::linear: {
        const std::size_t features = din.sample();
        if (features != static_cast<std::size_t>(node.in_channels)) throw ShapeMismatch(node.name + ": linear input size");
        const auto outs = static_cast<std::size_t>(node.out_channels);
        out = make4({din.n, outs, 1, 1});
        for (std::size_t n = 0; n < din.n; ++n) {
          const double* x = in.data() + n * features;
          for (std::size_t o = 0; o < outs; ++o) {
            const double* w = p.weight.data() + o * features;
            double acc = p.bias.empty() ? 0.0 : p.bias[o];
            for (std::size_t f = 0; f < features; ++f) acc += w[f] * x[f];
            out[n * outs + o] = acc;
          }
        }
        break;
      }
      case LayerKind::relu: {
        out = in;
        auto& pattern = t.relu_patterns[i];
        pattern.resize(out.size());
        for (std::size_t k = 0; k < out.size(); ++k) {
          pattern[k] = out[k] > 0.0 ? 1 : 0;
          if (!pattern[k]) out[k] = 0.0;
        }
        break;
      }
      case LayerKind::batchnorm: {
        out = in;
        const double inv = 1.0 / std::sqrt(1.0 + kBatchnormEps);
        for (std::size_t n = 0; n < din.n; ++n) {
          for (std::size_t c = 0; c < din.c; ++c) {
            double* v = out.data() + (n * din.c + c) * din.plane();
            const double scale = p.weight[c] * inv, shift = p.bias[c];
            for (std::size_t k = 0; k < din.plane(); ++k) v[k] = v[k] * scale + shift;
          }
        }
        break;
      }
      case LayerKind::maxpool: {
        const auto geo = geometry(node, g.dims, din);
        out = make4({din.n, din.c, static_cast<std::size_t>(geo.out_h), static_cast<std::size_t>(geo.out_w)});
        maxpool_forward(in, out, geo);
        break;
      }
      case LayerKind::global_avg_pool: {
        out = make4({din.n, din.c, 1, 1});
        for (std::size_t nc = 0; nc < din.n * din.c; ++nc) {
          const double* v = in.data() + nc * din.plane();
          double acc = 0.0;
          for (std::size_t k = 0; k < din.plane(); ++k) acc += v[k];
          out[nc] = acc / static_cast<double>(din.plane());
        }
        break;
      }
      case LayerKind::add: {
        out = in;
        for (std::size_t k = 1; k < node.inputs.size(); ++k) {
          const Tensor& other = producer_output(t, node.inputs[k]);
          if (other.shape() != out.shape()) throw ShapeMismatch(node.name + ": add operand shapes differ");
          for (std::size_t e = 0; e < out.size(); ++e) out[e] += other[e];
        }
        break;
      }
      case LayerKind::concat: {
        std::size_t channels = 0;
        for (int src : node.inputs) channels += producer_output(t, src).dim(1);
        out = make4({din.n, channels, din.h, din.w});
        std::size_t offset = 0;
        for (int src : node.inputs) {
          const Tensor& part = producer_output(t, src);
          const Dims dp = dims_of(part);
          if (dp.h != din.h || dp.w != din.w) throw ShapeMismatch(node.name + ": concat spatial sizes differ");
          for (std::size_t n = 0; n < din.n; ++n) {
            std::copy_n(part.data() + n * dp.sample(), dp.sample(), out.data() + (n * channels + offset) * din.plane());
          }
          offset += dp.c;
        }
        break;
      }
    }
  }

  const Tensor& last = t.activations.back();
  t.logits = Tensor({last.dim(0), last.size() / last.dim(0)}, std::vector<double>(last.values().begin(), last.values().end()));
  return t;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
    total += std::log(sum) + m - row[labels[i]];
  }
  return total / static_cast<double>(n);
}

GradientRecord backward(const ArchitectureGraph& g, const ParamSet& params, const ForwardTrace& trace,
                        std::span<const int> labels, const BackwardOptions& options) {
  check_labels(trace.logits, labels);
  const std::size_t batch = trace.batch_size();
  const std::size_t classes = trace.logits.dim(1);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  // In per-sample mode activations carry each sample's own loss gradient and
  // batch-level parameter gradients are averaged afterwards.
  const double logit_factor = options.loss_scale * (options.per_sample ? 1.0 : inv_batch);
  const double param_factor = options.per_sample ? inv_batch : 1.0;

  GradientRecord rec;
  rec.loss = options.loss_scale * cross_entropy(trace.logits, labels);
  rec.grads.resize(g.nodes.size());
  if (options.per_sample) rec.per_sample_weight.resize(g.nodes.size());

  std::vector<Tensor> dact(g.nodes.size());
  {
    const Tensor probs = softmax_rows(trace.logits);
    Tensor& d = dact.back();
    d = Tensor(trace.activations.back().shape(), 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < classes; ++j) {
        const double target = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
        d[i * classes + j] = logit_factor * (probs[i * classes + j] - target);
      }
    }
  }

  auto accumulate = [&](int idx, const Tensor& like) -> Tensor* {
    if (idx == kGraphInput) return nullptr;
    Tensor& slot = dact[static_cast<std::size_t>(idx)];
    if (slot.empty()) slot = Tensor(like.shape(), 0.0);
    return &slot;
  };

  for (std::size_t ii = g.nodes.size(); ii-- > 0;) {
    const auto& node = g.nodes[ii];
    Tensor dout = std::move(dact[ii]);
    if (dout.empty()) continue;
    const auto& p = params.layers[ii];
    auto& grad = rec.grads[ii];
    const Tensor& in = producer_output(trace, node.inputs.front());
    const Dims din = dims_of(in);

    switch (node.kind) {
      case LayerKind::conv:
      case LayerKind::depthwise_conv: {
        const bool depthwise = node.kind == LayerKind::depthwise_conv;
        const auto geo = geometry(node, g.dims, din);
        const auto out_plane = static_cast<std::size_t>(geo.out_h * geo.out_w);
        grad.weight = Tensor(p.weight.shape(), 0.0);
        if (options.per_sample) {
          auto& samples = rec.per_sample_weight[ii];
          samples.assign(batch, Tensor(p.weight.shape(), 0.0));
          for (std::size_t n = 0; n < batch; ++n) {
            conv_backward_weight(dout.data(), in.data(), samples[n].data(), din, n, node.out_channels, depthwise, geo);
            for (std::size_t e = 0; e < grad.weight.size(); ++e) grad.weight[e] += samples[n][e] * param_factor;
          }
        } else {
          for (std::size_t n = 0; n < batch; ++n) {
            conv_backward_weight(dout.data(), in.data(), grad.weight.data(), din, n, node.out_channels, depthwise, geo);
          }
        }
        if (!p.bias.empty()) {
          grad.bias = Tensor(p.bias.shape(), 0.0);
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t c = 0; c < static_cast<std::size_t>(node.out_channels); ++c) {
              const double* v = dout.data() + (n * static_cast<std::size_t>(node.out_channels) + c) * out_plane;
              double acc = 0.0;
              for (std::size_t k = 0; k < out_plane; ++k) acc += v[k];
              grad.bias[c] += acc * param_factor;
            }
          }
        }
        if (Tensor* dst = accumulate(node.inputs.front(), in)) {
          conv_backward_input(dout.data(), p.weight.data(), dst->data(), din, node.out_channels, depthwise, geo);
        }
        break;
      }
      case LayerKind::linear: {
        const std::size_t features = din.sample();
        const auto outs = static_cast<std::size_t>(node.out_channels);
        grad.weight = Tensor(p.weight.shape(), 0.0);
        if (!p.bias.empty()) grad.bias = Tensor(p.bias.shape(), 0.0);
        if (options.per_sample) rec.per_sample_weight[ii].assign(batch, Tensor(p.weight.shape(), 0.0));
        Tensor* dst = accumulate(node.inputs.front(), in);
        for (std::size_t n = 0; n < batch; ++n) {
          const double* x = in.data() + n * features;
          double* wsample = options.per_sample ? rec.per_sample_weight[ii][n].data() : grad.weight.data();
          for (std::size_t o = 0; o < outs; ++o) {
            const double go = dout[n * outs + o];
            if (!p.bias.empty()) grad.bias[o] += go * param_factor;
            double* wrow = wsample + o * features;
            for (std::size_t f = 0; f < features; ++f) wrow[f] += go * x[f];
            if (dst) {
              const double* w = p.weight.data() + o * features;
              double* dx = dst->data() + n * features;
              for (std::size_t f = 0; f < features; ++f) dx[f] += go * w[f];
            }
          }
        }
        if (options.per_sample) {
          for (const auto& s : rec.per_sample_weight[ii]) {
            for (std::size_t e = 0; e < grad.weight.size(); ++e) grad.weight[e] += s[e] * param_factor;
          }
        }
        break;
      }
      case LayerKind::relu: {
        if (Tensor* dst = accumulate(node.inputs.front(), in)) {
          const auto& pattern = trace.relu_patterns[ii];
          for (std::size_t k = 0; k < dout.size(); ++k) {
            if (pattern[k]) (*dst)[k] += dout[k];
          }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const double inv = 1.0 / std::sqrt(1.0 + kBatchnormEps);
        grad.weight = Tensor(p.weight.shape(), 0.0);
        grad.bias = Tensor(p.bias.shape(), 0.0);
        Tensor* dst = accumulate(node.inputs.front(), in);
        for (std::size_t n = 0; n < din.n; ++n) {
          for (std::size_t c = 0; c < din.c; ++c) {
            const std::size_t base = (n * din.c + c) * din.plane();
            double gsum = 0.0, gx = 0.0;
            for (std::size_t k = 0; k < din.plane(); ++k) {
              gsum += dout[base + k];
              gx += dout[base + k] * in[base + k];
            }
            grad.weight[c] += gx * inv * param_factor;
            grad.bias[c] += gsum * param_factor;
            if (dst) {
              const double scale = p.weight[c] * inv;
              for (std::size_t k = 0; k < din.plane(); ++k) (*dst)[base + k] += dout[base + k] * scale;
            }
          }
        }
        break;
      }
      case LayerKind::maxpool: {
        if (Tensor* dst = accumulate(node.inputs.front(), in)) {
          maxpool_backward(in, dout, *dst, geometry(node, g.dims, din));
        }
        break;
      }
      case LayerKind::global_avg_pool: {
        if (Tensor* dst = accumulate(node.inputs.front(), in)) {
          const double inv_plane = 1.0 / static_cast<double>(din.plane());
          for (std::size_t nc = 0; nc < din.n * din.c; ++nc) {
            double* dx = dst->data() + nc * din.plane();
            for (std::size_t k = 0; k < din.plane(); ++k) dx[k] += dout[nc] * inv_plane;
          }
        }
        break;
      }
      case LayerKind::add: {
        for (int src : node.inputs) {
          if (Tensor* dst = accumulate(src, producer_output(trace, src))) {
            for (std::size_t k = 0; k < dout.size(); ++k) (*dst)[k] += dout[k];
          }
        }
        break;
      }
      case LayerKind::concat: {
        const Dims dout_dims = dims_of(dout);
        std::size_t offset = 0;
        for (int src : node.inputs) {
          const Tensor& part = producer_output(trace, src);
          const Dims dp = dims_of(part);
          if (Tensor* dst = accumulate(src, part)) {
            for (std::size_t n = 0; n < dp.n; ++n) {
              const double* from = dout.data() + (n * dout_dims.c + offset) * dp.plane();
              double* to = dst->data() + n * dp.sample();
              for (std::size_t k = 0; k < dp.sample(); ++k) to[k] += from[k];
            }
          }
          offset += dp.c;
        }
        break;
      }
    }
  }
  return rec;
}

GradientRecord backward(const ArchitectureGraph& g, const ParamSet& params, const Tensor& batch,
                        std::span<const int> labels, const BackwardOptions& options) {
  return backward(g, params, forward(g, params, batch), labels, options);
}

}  // namespace protonas
