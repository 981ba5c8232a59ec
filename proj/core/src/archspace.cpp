#include "protonas/archspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "protonas/error.hpp"

namespace protonas {

namespace {

struct ShapeIssue {
  std::string message;
  bool collapse = false;
};

int spatial_out(int extent, int kernel, int stride, int padding) noexcept {
  const int span = extent + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

// Output shape of one layer given its producers' shapes. Problems are
// appended to `issues`; a best-effort shape is still returned.
FeatureShape layer_output(const LayerSpec& l, const std::vector<FeatureShape>& ins, int dims,
                          std::vector<ShapeIssue>& issues) {
  auto issue = [&](std::string msg, bool collapse = false) {
    issues.push_back({std::move(msg), collapse});
  };
  const FeatureShape first = ins.empty() ? FeatureShape{} : ins.front();
  auto strided = [&](FeatureShape s, int channels) {
    s.channels = channels;
    if (dims == 2) s.height = spatial_out(first.height, l.kernel, l.stride, l.padding);
    s.width = spatial_out(first.width, l.kernel, l.stride, l.padding);
    if (s.height < 1 || s.width < 1) issue("spatial collapse", true);
    return s;
  };

  switch (l.kind) {
    case LayerKind::conv:
      if (first.channels != l.in_channels) issue("channel mismatch");
      return strided(first, l.out_channels);
    case LayerKind::depthwise_conv:
      if (first.channels != l.in_channels) issue("channel mismatch");
      if (l.out_channels != l.in_channels) issue("depthwise conv must preserve channels");
      return strided(first, l.out_channels);
    case LayerKind::maxpool:
      if (first.channels != l.in_channels) issue("channel mismatch");
      return strided(first, first.channels);
    case LayerKind::linear:
      if (first.elements() != l.in_channels) issue("channel mismatch");
      return {l.out_channels, 1, 1};
    case LayerKind::relu:
    case LayerKind::batchnorm:
      if (first.channels != l.in_channels) issue("channel mismatch");
      return first;
    case LayerKind::global_avg_pool:
      if (first.channels != l.in_channels) issue("channel mismatch");
      return {first.channels, 1, 1};
    case LayerKind::add:
      for (const auto& s : ins) {
        if (s != first) {
          issue("add operands differ in shape");
          break;
        }
      }
      if (first.channels != l.in_channels) issue("channel mismatch");
      return first;
    case LayerKind::concat: {
      int channels = 0;
      for (const auto& s : ins) {
        if (s.height != first.height || s.width != first.width) issue("concat operands differ in spatial size");
        channels += s.channels;
      }
      if (channels != l.out_channels) issue("channel mismatch");
      return {channels, first.height, first.width};
    }
  }
  return first;
}

FeatureShape input_shape_of(const ArchitectureGraph& g, const std::vector<FeatureShape>& shapes, int idx) {
  return idx == kGraphInput ? g.input : shapes.at(static_cast<std::size_t>(idx));
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Incrementally appends nodes while tracking their output shapes.
class GraphBuilder {
 public:
  GraphBuilder(std::string template_id, const TaskShape& task) {
    g_.template_id = std::move(template_id);
    g_.dims = task.dims;
    g_.input = {task.channels, task.dims == 2 ? task.height : 1, task.width};
    g_.num_classes = task.num_classes;
  }

  FeatureShape shape(int idx) const { return input_shape_of(g_, shapes_, idx); }

  int append(LayerSpec spec) {
    std::vector<FeatureShape> ins;
    for (int in : spec.inputs) ins.push_back(shape(in));
    // Stride 2 is clamped to 1 if it would collapse a spatial extent.
    if (spec.stride == 2 && !ins.empty()) {
      const auto& s = ins.front();
      const bool h_collapse = g_.dims == 2 && spatial_out(s.height, spec.kernel, 2, spec.padding) < 1;
      if (h_collapse || spatial_out(s.width, spec.kernel, 2, spec.padding) < 1) spec.stride = 1;
    }
    std::vector<ShapeIssue> issues;
    const auto out = layer_output(spec, ins, g_.dims, issues);
    for (const auto& i : issues) {
      if (i.collapse) throw ShapeCollapse(spec.name + ": " + i.message);
      throw ShapeMismatch(spec.name + ": " + i.message);
    }
    shapes_.push_back(out);
    g_.nodes.push_back(std::move(spec));
    return static_cast<int>(g_.nodes.size()) - 1;
  }

  ArchitectureGraph& graph() noexcept { return g_; }

 private:
  ArchitectureGraph g_;
  std::vector<FeatureShape> shapes_;
};

struct PatternContext {
  int input_node = kGraphInput;
  int nominal_in = 1;
  int nominal_out = 1;
  int gene_kernel = 3;
  int gene_stride = 1;
  int group = -1;
  int superblock = -1;
  double width = 1.0;
  int num_classes = 1;
  std::string prefix;
};

LayerKind to_layer_kind(PatternOp op) {
  switch (op) {
    case PatternOp::conv: return LayerKind::conv;
    case PatternOp::depthwise_conv: return LayerKind::depthwise_conv;
    case PatternOp::linear: return LayerKind::linear;
    case PatternOp::relu: return LayerKind::relu;
    case PatternOp::batchnorm: return LayerKind::batchnorm;
    case PatternOp::maxpool: return LayerKind::maxpool;
    case PatternOp::global_avg_pool: return LayerKind::global_avg_pool;
    case PatternOp::add: return LayerKind::add;
    case PatternOp::concat: return LayerKind::concat;
    case PatternOp::residual:
    case PatternOp::residual_projection: break;
  }
  throw TemplateError("residual ops have no direct layer kind");
}

// Instantiates a layer pattern; returns the index of its last node.
int emit_pattern(GraphBuilder& b, const LayerPattern& pattern, const PatternContext& ctx) {
  std::map<std::string, int, std::less<>> named{{"in", ctx.input_node}};
  int prev = ctx.input_node;
  int ordinal = 0;

  auto make = [&](LayerKind kind, std::vector<int> inputs, std::string_view label) {
    LayerSpec spec;
    spec.kind = kind;
    spec.inputs = std::move(inputs);
    spec.in_channels = b.shape(spec.inputs.front()).channels;
    spec.out_channels = spec.in_channels;
    spec.group = ctx.group;
    spec.superblock = ctx.superblock;
    spec.name = ctx.prefix + std::string(label) + std::to_string(ordinal++);
    return spec;
  };

  for (const auto& layer : pattern.layers) {
    std::vector<int> inputs;
    if (layer.inputs.empty()) {
      inputs.push_back(prev);
    } else {
      for (const auto& name : layer.inputs) inputs.push_back(named.find(name)->second);
    }
    const std::string label = layer.name.empty() ? std::string(to_string(layer.op)) : layer.name;

    int produced = prev;
    switch (layer.op) {
      case PatternOp::conv:
      case PatternOp::depthwise_conv:
      case PatternOp::maxpool: {
        auto spec = make(to_layer_kind(layer.op), inputs, label);
        spec.kernel = layer.kernel.evaluate(ctx.gene_kernel);
        spec.stride = layer.stride.from_gene ? ctx.gene_stride : layer.stride.value;
        spec.padding = (spec.kernel - 1) / 2;
        if (layer.op == PatternOp::conv) {
          spec.nominal_out = layer.out.evaluate(ctx.nominal_in, ctx.nominal_out);
          spec.out_channels = scale_channels(spec.nominal_out, ctx.width);
          spec.bias = layer.bias;
          spec.prunable = ctx.group >= 0;
        } else if (layer.op == PatternOp::depthwise_conv) {
          spec.bias = layer.bias;
        }
        produced = b.append(std::move(spec));
        break;
      }
      case PatternOp::linear: {
        auto spec = make(LayerKind::linear, inputs, label);
        spec.in_channels = static_cast<int>(b.shape(inputs.front()).elements());
        spec.out_channels = ctx.num_classes;
        spec.bias = layer.bias;
        produced = b.append(std::move(spec));
        break;
      }
      case PatternOp::relu:
      case PatternOp::batchnorm:
      case PatternOp::global_avg_pool:
        produced = b.append(make(to_layer_kind(layer.op), inputs, label));
        break;
      case PatternOp::add:
      case PatternOp::concat: {
        auto spec = make(to_layer_kind(layer.op), inputs, label);
        if (layer.op == PatternOp::concat) {
          spec.out_channels = 0;
          for (int in : inputs) spec.out_channels += b.shape(in).channels;
        }
        produced = b.append(std::move(spec));
        break;
      }
      case PatternOp::residual:
      case PatternOp::residual_projection: {
        const int body = inputs.front();
        const auto body_shape = b.shape(body);
        int skip = ctx.input_node;
        if (b.shape(skip) != body_shape) {
          if (layer.op == PatternOp::residual) break;  // shapes differ: no skip
          auto proj = make(LayerKind::conv, {skip}, "shortcut_conv");
          proj.kernel = 1;
          proj.stride = ctx.gene_stride;
          proj.padding = 0;
          proj.nominal_out = ctx.nominal_out;
          proj.out_channels = body_shape.channels;
          proj.prunable = ctx.group >= 0;
          skip = b.append(std::move(proj));
          skip = b.append(make(LayerKind::batchnorm, {skip}, "shortcut_bn"));
        }
        produced = b.append(make(LayerKind::add, {body, skip}, label));
        break;
      }
    }
    prev = produced;
    if (!layer.name.empty()) named[layer.name] = produced;
  }
  return prev;
}

}  // namespace

// ---------------------------------------------------------------------------
// Search space

void SearchSpaceDef::check() const {
  if (baseline_pool.empty()) throw ConfigError("space.baseline_pool: must not be empty");
  if (depth_values.empty()) throw ConfigError("space.depth_values: must not be empty");
  for (int d : depth_values) {
    if (d < 0) throw ConfigError("space.depth_values: depths must be >= 0");
  }
  if (kernel_stride_values.empty()) throw ConfigError("space.kernel_stride_values: must not be empty");
  for (const auto& ks : kernel_stride_values) {
    if (ks.kernel < 1 || ks.kernel % 2 == 0) throw ConfigError("space.kernel_stride_values: kernels must be odd");
    if (ks.stride != 1 && ks.stride != 2) throw ConfigError("space.kernel_stride_values: strides must be 1 or 2");
  }
  if (!(width_range.lo > 0.0) || width_range.lo > width_range.hi) {
    throw ConfigError("space.width_range: need 0 < lo <= hi");
  }
  if (!(sparsity_range.lo >= 0.0) || sparsity_range.lo > sparsity_range.hi || sparsity_range.hi >= 1.0) {
    throw ConfigError("space.sparsity_range: need 0 <= lo <= hi < 1");
  }
}

std::array<double, HyperparamVector::gene_count> HyperparamVector::encode() const noexcept {
  std::array<double, gene_count> genes{};
  std::size_t i = 0;
  genes[i++] = architecture;
  for (int d : group_depth) genes[i++] = d;
  for (int ks : kernel_stride) genes[i++] = ks;
  genes[i++] = width_multiplier;
  for (double s : pruning_sparsity) genes[i++] = s;
  return genes;
}

HyperparamVector HyperparamVector::decode_genes(std::span<const double> genes) {
  if (genes.size() != gene_count) {
    throw ConfigError("gene vector must have " + std::to_string(gene_count) + " entries");
  }
  HyperparamVector x;
  std::size_t i = 0;
  x.architecture = static_cast<int>(std::lround(genes[i++]));
  for (auto& d : x.group_depth) d = static_cast<int>(std::lround(genes[i++]));
  for (auto& ks : x.kernel_stride) ks = static_cast<int>(std::lround(genes[i++]));
  x.width_multiplier = genes[i++];
  for (auto& s : x.pruning_sparsity) s = genes[i++];
  return x;
}

bool in_range(const HyperparamVector& x, const SearchSpaceDef& space) noexcept {
  if (x.architecture < 0 || x.architecture >= static_cast<int>(space.baseline_pool.size())) return false;
  for (int d : x.group_depth) {
    if (std::find(space.depth_values.begin(), space.depth_values.end(), d) == space.depth_values.end()) return false;
  }
  for (int ks : x.kernel_stride) {
    if (ks < 0 || ks >= static_cast<int>(space.kernel_stride_values.size())) return false;
  }
  if (!space.width_range.contains(x.width_multiplier)) return false;
  return std::all_of(x.pruning_sparsity.begin(), x.pruning_sparsity.end(),
                     [&](double s) { return space.sparsity_range.contains(s); });
}

HyperparamVector sample(Rng& rng, const SearchSpaceDef& space) {
  auto pick = [&](std::size_t n) {
    return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  auto uniform = [&](const Interval& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };

  HyperparamVector x;
  x.architecture = pick(space.baseline_pool.size());
  for (auto& d : x.group_depth) d = space.depth_values[static_cast<std::size_t>(pick(space.depth_values.size()))];
  for (auto& ks : x.kernel_stride) ks = pick(space.kernel_stride_values.size());
  x.width_multiplier = uniform(space.width_range);
  for (auto& s : x.pruning_sparsity) s = uniform(space.sparsity_range);
  return x;
}

// ---------------------------------------------------------------------------
// Graph helpers

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise_conv: return "depthwise_conv";
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
  }
  return "unknown";
}

bool has_weights(LayerKind kind) noexcept {
  return kind == LayerKind::conv || kind == LayerKind::depthwise_conv || kind == LayerKind::linear;
}

int ArchitectureGraph::superblock_count() const noexcept {
  int count = 0;
  for (const auto& n : nodes) count = std::max(count, n.superblock + 1);
  return count;
}

std::vector<FeatureShape> infer_shapes(const ArchitectureGraph& g) {
  std::vector<FeatureShape> shapes;
  shapes.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    std::vector<FeatureShape> ins;
    for (int in : node.inputs) {
      if (in >= static_cast<int>(i)) throw ShapeMismatch("nodes not in topological order");
      ins.push_back(input_shape_of(g, shapes, in));
    }
    if (ins.empty()) throw ShapeMismatch("node " + std::to_string(i) + " has no inputs");
    std::vector<ShapeIssue> issues;
    shapes.push_back(layer_output(node, ins, g.dims, issues));
    if (!issues.empty()) {
      const auto& first = issues.front();
      const auto msg = "node " + std::to_string(i) + " (" + node.name + "): " + first.message;
      if (first.collapse) throw ShapeCollapse(msg);
      throw ShapeMismatch(msg);
    }
  }
  return shapes;
}

std::vector<std::vector<int>> consumers(const ArchitectureGraph& g) {
  std::vector<std::vector<int>> out(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (int in : g.nodes[i].inputs) {
      if (in >= 0 && in < static_cast<int>(g.nodes.size())) out[static_cast<std::size_t>(in)].push_back(static_cast<int>(i));
    }
  }
  return out;
}

int scale_channels(int nominal, double width_multiplier) noexcept {
  return std::max(4, static_cast<int>(std::lround(width_multiplier * nominal)));
}

int pruned_channels(int channels, double sparsity) noexcept {
  // The epsilon keeps products such as 0.29 * 100 from flooring one short.
  const int removed = static_cast<int>(std::floor(sparsity * channels + 1e-9));
  return std::max(1, channels - removed);
}

// ---------------------------------------------------------------------------
// Decode

ArchitectureGraph decode(const HyperparamVector& x, const SearchSpaceDef& space,
                         const TemplateLibrary& templates, const TaskShape& task) {
  if (!in_range(x, space)) throw ConfigError("hyperparameter vector outside the search space");
  const auto& tpl = templates.find(space.baseline_pool[static_cast<std::size_t>(x.architecture)]);
  if (tpl.dims != task.dims) {
    throw ConfigError("template '" + tpl.id + "' is " + std::to_string(tpl.dims) + "-D but the task is " +
                      std::to_string(task.dims) + "-D");
  }

  GraphBuilder b(tpl.id, task);
  PatternContext ctx;
  ctx.width = x.width_multiplier;
  ctx.num_classes = task.num_classes;

  ctx.nominal_in = task.channels;
  ctx.nominal_out = tpl.stem_channels;
  ctx.prefix = "stem.";
  int cursor = emit_pattern(b, tpl.stem, ctx);
  int nominal = tpl.stem_channels;

  int superblock = 0;
  for (int group = 0; group < kGroupCount; ++group) {
    const auto& ks = space.kernel_stride_values[static_cast<std::size_t>(x.kernel_stride[static_cast<std::size_t>(group)])];
    const int blocks = 1 + x.group_depth[static_cast<std::size_t>(group)];
    for (int j = 0; j < blocks; ++j) {
      PatternContext sb;
      sb.input_node = cursor;
      sb.nominal_in = nominal;
      sb.nominal_out = tpl.group_channels[static_cast<std::size_t>(group)];
      sb.gene_kernel = ks.kernel;
      sb.gene_stride = j == 0 ? ks.stride : 1;
      sb.group = group;
      sb.superblock = superblock;
      sb.width = x.width_multiplier;
      sb.num_classes = task.num_classes;
      sb.prefix = "g" + std::to_string(group) + ".b" + std::to_string(j) + ".";
      cursor = emit_pattern(b, tpl.superblock, sb);
      b.graph().nodes[static_cast<std::size_t>(cursor)].tap = true;
      nominal = sb.nominal_out;
      ++superblock;
    }
  }

  PatternContext head;
  head.input_node = cursor;
  head.nominal_in = nominal;
  head.nominal_out = task.num_classes;
  head.width = x.width_multiplier;
  head.num_classes = task.num_classes;
  head.prefix = "head.";
  emit_pattern(b, tpl.classifier, head);
  return std::move(b.graph());
}

// ---------------------------------------------------------------------------
// Static pruning

ArchitectureGraph apply_static_pruning(const ArchitectureGraph& g,
                                       const std::array<double, kGroupCount>& sparsity) {
  const auto n = g.nodes.size();

  // Channel producer behind channel-preserving layers.
  auto producer = [&](int idx) {
    while (idx >= 0) {
      const auto kind = g.nodes[static_cast<std::size_t>(idx)].kind;
      const bool preserving = kind == LayerKind::relu || kind == LayerKind::batchnorm ||
                              kind == LayerKind::depthwise_conv || kind == LayerKind::maxpool;
      if (!preserving) break;
      idx = g.nodes[static_cast<std::size_t>(idx)].inputs.front();
    }
    return idx;
  };

  // Residual adds tie their operands' producers to one channel count.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.nodes[i].kind != LayerKind::add) continue;
    for (int in : g.nodes[i].inputs) {
      const int p = producer(in);
      if (p < 0) throw ShapeMismatch("residual add fed directly by the graph input cannot be pruned");
      parent[static_cast<std::size_t>(find_root(parent, p))] = find_root(parent, static_cast<int>(i));
    }
  }

  std::vector<int> desired(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = g.nodes[i];
    if (node.kind != LayerKind::conv) continue;
    desired[i] = node.prunable && node.group >= 0
                     ? pruned_channels(node.out_channels, sparsity[static_cast<std::size_t>(node.group)])
                     : node.out_channels;
  }
  std::vector<std::optional<int>> tied(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int root = find_root(parent, static_cast<int>(i));
    if (root == static_cast<int>(i) && g.nodes[i].kind != LayerKind::add) continue;
    const auto kind = g.nodes[i].kind;
    if (kind == LayerKind::add) continue;
    if (kind != LayerKind::conv) throw ShapeMismatch("residual add over a non-conv producer cannot be pruned");
    auto& slot = tied[static_cast<std::size_t>(root)];
    slot = slot ? std::min(*slot, desired[i]) : desired[i];
  }

  ArchitectureGraph out = g;
  std::vector<FeatureShape> shapes;
  shapes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = out.nodes[i];
    const auto in_shape = input_shape_of(out, shapes, node.inputs.front());
    node.in_channels = node.kind == LayerKind::linear ? static_cast<int>(in_shape.elements()) : in_shape.channels;
    switch (node.kind) {
      case LayerKind::conv: {
        const auto& t = tied[static_cast<std::size_t>(find_root(parent, static_cast<int>(i)))];
        node.out_channels = t ? *t : desired[i];
        break;
      }
      case LayerKind::linear:
        break;
      case LayerKind::concat:
        node.out_channels = 0;
        for (int in : node.inputs) node.out_channels += input_shape_of(out, shapes, in).channels;
        break;
      default:
        node.out_channels = node.in_channels;
        break;
    }
    std::vector<FeatureShape> ins;
    for (int in : node.inputs) ins.push_back(input_shape_of(out, shapes, in));
    std::vector<ShapeIssue> issues;
    shapes.push_back(layer_output(node, ins, out.dims, issues));
    if (!issues.empty()) throw ShapeMismatch(node.name + ": " + issues.front().message + " after pruning");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate(const ArchitectureGraph& g) {
  std::vector<std::string> violations;
  const int n = static_cast<int>(g.nodes.size());
  if (n == 0) {
    violations.emplace_back("graph has no nodes");
    return violations;
  }
  auto at = [&](int i, const std::string& msg) {
    const auto& name = g.nodes[static_cast<std::size_t>(i)].name;
    return "node " + std::to_string(i) + (name.empty() ? "" : " (" + name + ")") + ": " + msg;
  };

  bool references_ok = true;
  for (int i = 0; i < n; ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    if (node.inputs.empty()) {
      violations.push_back(at(i, "no inputs"));
      references_ok = false;
    }
    for (int in : node.inputs) {
      if (in < kGraphInput || in >= n) {
        violations.push_back(at(i, "invalid input reference"));
        references_ok = false;
      }
    }
  }
  if (!references_ok) return violations;

  // Kahn's algorithm over producer -> consumer edges.
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  const auto users = consumers(g);
  for (int i = 0; i < n; ++i) {
    for (int in : g.nodes[static_cast<std::size_t>(i)].inputs) {
      if (in >= 0) ++indegree[static_cast<std::size_t>(i)];
    }
  }
  std::vector<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
  }
  int visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int u : users[static_cast<std::size_t>(v)]) {
      if (--indegree[static_cast<std::size_t>(u)] == 0) ready.push_back(u);
    }
  }
  if (visited != n) {
    violations.emplace_back("not acyclic");
    return violations;
  }
  for (int i = 0; i < n; ++i) {
    for (int in : g.nodes[static_cast<std::size_t>(i)].inputs) {
      if (in >= i) {
        violations.push_back(at(i, "nodes not in topological order"));
        return violations;
      }
    }
  }

  int input_consumers = 0;
  for (const auto& node : g.nodes) {
    input_consumers += static_cast<int>(std::count(node.inputs.begin(), node.inputs.end(), kGraphInput));
  }
  if (input_consumers != 1) violations.emplace_back("graph input must feed exactly one node");

  int outputs = 0;
  for (int i = 0; i < n; ++i) {
    if (users[static_cast<std::size_t>(i)].empty()) {
      ++outputs;
      if (i != n - 1) violations.push_back(at(i, "dangling output"));
    }
  }
  if (outputs != 1) violations.emplace_back("graph must have a single output node");

  std::vector<FeatureShape> shapes;
  shapes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    const bool multi = node.kind == LayerKind::add || node.kind == LayerKind::concat;
    if (multi && node.inputs.size() < 2) violations.push_back(at(i, "add/concat needs at least two inputs"));
    if (!multi && node.inputs.size() != 1) violations.push_back(at(i, "layer takes exactly one input"));
    if (node.in_channels < 1 || node.out_channels < 1) violations.push_back(at(i, "channel counts must be >= 1"));
    if (node.kernel < 1 || node.kernel % 2 == 0) violations.push_back(at(i, "kernel must be odd"));
    if (node.stride != 1 && node.stride != 2) violations.push_back(at(i, "stride must be 1 or 2"));

    std::vector<FeatureShape> ins;
    for (int in : node.inputs) ins.push_back(input_shape_of(g, shapes, in));
    std::vector<ShapeIssue> issues;
    shapes.push_back(layer_output(node, ins, g.dims, issues));
    for (const auto& issue : issues) violations.push_back(at(i, issue.message));
  }
  if (g.nodes.back().out_channels != g.num_classes) violations.emplace_back("output width differs from class count");
  return violations;
}

}  // namespace protonas
