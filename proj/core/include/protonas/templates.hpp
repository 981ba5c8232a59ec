#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace protonas {

// Baseline templates describe a backbone as stem -> four groups of repeated
// superblocks -> classifier. Each part is a small layer pattern whose channel,
// kernel and stride fields are symbolic and resolved at decode time.

enum class PatternOp {
  conv,
  depthwise_conv,
  linear,
  relu,
  batchnorm,
  maxpool,
  global_avg_pool,
  add,
  concat,
  residual,             // identity skip from the superblock input when shapes allow, else nothing
  residual_projection,  // identity skip when shapes allow, else 1x1 conv + batchnorm on the skip
};

std::string_view to_string(PatternOp op) noexcept;

// "in" / "out" optionally followed by "*N" or "/N". In the stem "out" is the
// stem channel count; in a superblock it is the group channel count.
struct ChannelExpr {
  enum class Base { in, out };
  Base base = Base::out;
  int multiplier = 1;
  int divisor = 1;

  int evaluate(int nominal_in, int nominal_out) const;
};

// Either a literal or "k" / "k+N" taken from the group's kernel gene.
struct KernelExpr {
  bool from_gene = false;
  int value = 1;  // literal kernel, or offset added to the gene kernel

  int evaluate(int gene_kernel) const noexcept { return from_gene ? gene_kernel + value : value; }
};

// Either a literal or "s" taken from the group's stride gene.
struct StrideExpr {
  bool from_gene = false;
  int value = 1;
};

struct PatternLayer {
  std::string name;
  PatternOp op = PatternOp::relu;
  std::vector<std::string> inputs;  // empty: previous layer; "in": pattern input
  ChannelExpr out;
  KernelExpr kernel;
  StrideExpr stride;
  bool bias = false;
};

struct LayerPattern {
  std::vector<PatternLayer> layers;
};

struct BaselineTemplate {
  std::string id;
  std::string description;
  int dims = 2;  // 1 or 2 spatial dimensions
  int stem_channels = 16;
  LayerPattern stem;
  std::array<int, 4> group_channels{};
  LayerPattern superblock;
  LayerPattern classifier;
};

struct TemplateLibrary {
  int version = 0;
  std::vector<BaselineTemplate> templates;

  const BaselineTemplate& find(std::string_view id) const;
  bool contains(std::string_view id) const noexcept;
  std::vector<std::string> ids() const;
};

inline constexpr int kTemplateFormatVersion = 1;

TemplateLibrary parse_templates(std::string_view json_text);
TemplateLibrary load_templates(const std::filesystem::path& path);

// The template file shipped with the library (core/data/templates.json).
const TemplateLibrary& builtin_templates();

}  // namespace protonas
