#include "protonas/templates.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "builtin_templates.hpp"
#include "protonas/error.hpp"

namespace protonas {

namespace {

using nlohmann::json;

struct OpName {
  std::string_view name;
  PatternOp op;
};

constexpr std::array<OpName, 11> kOpNames{{
    {"conv", PatternOp::conv},
    {"depthwise_conv", PatternOp::depthwise_conv},
    {"linear", PatternOp::linear},
    {"relu", PatternOp::relu},
    {"batchnorm", PatternOp::batchnorm},
    {"maxpool", PatternOp::maxpool},
    {"global_avg_pool", PatternOp::global_avg_pool},
    {"add", PatternOp::add},
    {"concat", PatternOp::concat},
    {"residual", PatternOp::residual},
    {"residual_projection", PatternOp::residual_projection},
}};

int parse_int(std::string_view s, const std::string& where) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw TemplateError(where + ": expected integer, got '" + std::string(s) + "'");
  }
  return value;
}

ChannelExpr parse_channels(const std::string& text, const std::string& where) {
  ChannelExpr expr;
  std::string_view s = text;
  if (s.starts_with("in")) {
    expr.base = ChannelExpr::Base::in;
    s.remove_prefix(2);
  } else if (s.starts_with("out")) {
    expr.base = ChannelExpr::Base::out;
    s.remove_prefix(3);
  } else {
    throw TemplateError(where + ": channel expression must start with 'in' or 'out'");
  }
  if (s.empty()) return expr;
  const char op = s.front();
  s.remove_prefix(1);
  const int n = parse_int(s, where);
  if (n < 1) throw TemplateError(where + ": channel factor must be >= 1");
  if (op == '*') {
    expr.multiplier = n;
  } else if (op == '/') {
    expr.divisor = n;
  } else {
    throw TemplateError(where + ": channel expression operator must be '*' or '/'");
  }
  return expr;
}

KernelExpr parse_kernel(const json& j, const std::string& where) {
  KernelExpr k;
  if (j.is_number_integer()) {
    k.value = j.get<int>();
    if (k.value < 1 || k.value % 2 == 0) throw TemplateError(where + ": kernel must be odd and >= 1");
    return k;
  }
  if (!j.is_string()) throw TemplateError(where + ": kernel must be an integer or \"k\"/\"k+N\"");
  const auto s = j.get<std::string>();
  if (s == "k") {
    k.from_gene = true;
    k.value = 0;
    return k;
  }
  if (s.starts_with("k+")) {
    k.from_gene = true;
    k.value = parse_int(std::string_view(s).substr(2), where);
    if (k.value < 0 || k.value % 2 != 0) throw TemplateError(where + ": kernel offset must be even and >= 0");
    return k;
  }
  throw TemplateError(where + ": unrecognised kernel expression '" + s + "'");
}

StrideExpr parse_stride(const json& j, const std::string& where) {
  StrideExpr s;
  if (j.is_number_integer()) {
    s.value = j.get<int>();
    if (s.value != 1 && s.value != 2) throw TemplateError(where + ": stride must be 1 or 2");
    return s;
  }
  if (j.is_string() && j.get<std::string>() == "s") {
    s.from_gene = true;
    return s;
  }
  throw TemplateError(where + ": stride must be 1, 2 or \"s\"");
}

PatternLayer parse_layer(const json& j, const std::string& where) {
  if (!j.is_object()) throw TemplateError(where + ": layer must be an object");
  PatternLayer layer;
  const auto op_it = j.find("op");
  if (op_it == j.end() || !op_it->is_string()) throw TemplateError(where + ": missing \"op\"");
  const auto op_name = op_it->get<std::string>();
  const auto found = std::find_if(kOpNames.begin(), kOpNames.end(),
                                  [&](const OpName& o) { return o.name == op_name; });
  if (found == kOpNames.end()) throw TemplateError(where + ": unknown op '" + op_name + "'");
  layer.op = found->op;

  for (const auto& [key, value] : j.items()) {
    if (key == "op") continue;
    const std::string field = where + "." + key;
    if (key == "name") {
      layer.name = value.get<std::string>();
    } else if (key == "inputs") {
      if (!value.is_array()) throw TemplateError(field + ": expected a list of layer names");
      for (const auto& in : value) layer.inputs.push_back(in.get<std::string>());
    } else if (key == "out") {
      layer.out = parse_channels(value.get<std::string>(), field);
    } else if (key == "kernel") {
      layer.kernel = parse_kernel(value, field);
    } else if (key == "stride") {
      layer.stride = parse_stride(value, field);
    } else if (key == "bias") {
      layer.bias = value.get<bool>();
    } else {
      throw TemplateError(field + ": unknown field");
    }
  }
  const bool multi_input = layer.op == PatternOp::add || layer.op == PatternOp::concat;
  if (multi_input && layer.inputs.size() < 2) throw TemplateError(where + ": add/concat need >= 2 inputs");
  if (!multi_input && layer.inputs.size() > 1) throw TemplateError(where + ": op takes a single input");
  return layer;
}

LayerPattern parse_pattern(const json& j, const std::string& where) {
  if (!j.is_array()) throw TemplateError(where + ": expected a list of layers");
  LayerPattern pattern;
  for (std::size_t i = 0; i < j.size(); ++i) {
    pattern.layers.push_back(parse_layer(j[i], where + "[" + std::to_string(i) + "]"));
  }
  // Named references must point backwards.
  std::vector<std::string> seen{"in"};
  for (const auto& layer : pattern.layers) {
    for (const auto& in : layer.inputs) {
      if (std::find(seen.begin(), seen.end(), in) == seen.end()) {
        throw TemplateError(where + ": reference to unknown or later layer '" + in + "'");
      }
    }
    if (!layer.name.empty()) {
      if (std::find(seen.begin(), seen.end(), layer.name) != seen.end()) {
        throw TemplateError(where + ": duplicate layer name '" + layer.name + "'");
      }
      seen.push_back(layer.name);
    }
  }
  return pattern;
}

BaselineTemplate parse_template(const json& j, const std::string& where) {
  BaselineTemplate t;
  try {
    t.id = j.at("id").get<std::string>();
    t.description = j.value("description", std::string{});
    t.dims = j.at("dims").get<int>();
    if (t.dims != 1 && t.dims != 2) throw TemplateError(where + ".dims: must be 1 or 2");
    const auto& stem = j.at("stem");
    t.stem_channels = stem.at("channels").get<int>();
    if (t.stem_channels < 1) throw TemplateError(where + ".stem.channels: must be >= 1");
    t.stem = parse_pattern(stem.at("layers"), where + ".stem.layers");
    const auto groups = j.at("groups").get<std::vector<int>>();
    if (groups.size() != t.group_channels.size()) throw TemplateError(where + ".groups: expected 4 entries");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] < 1) throw TemplateError(where + ".groups: channel counts must be >= 1");
      t.group_channels[i] = groups[i];
    }
    t.superblock = parse_pattern(j.at("superblock"), where + ".superblock");
    t.classifier = parse_pattern(j.at("classifier"), where + ".classifier");
  } catch (const json::exception& e) {
    throw TemplateError(where + ": " + e.what());
  }
  if (t.superblock.layers.empty()) throw TemplateError(where + ".superblock: must not be empty");
  if (t.classifier.layers.empty() || t.classifier.layers.back().op != PatternOp::linear) {
    throw TemplateError(where + ".classifier: must end with a linear layer");
  }
  return t;
}

}  // namespace

std::string_view to_string(PatternOp op) noexcept {
  for (const auto& o : kOpNames) {
    if (o.op == op) return o.name;
  }
  return "unknown";
}

int ChannelExpr::evaluate(int nominal_in, int nominal_out) const {
  const int base_value = base == Base::in ? nominal_in : nominal_out;
  return std::max(1, base_value * multiplier / divisor);
}

const BaselineTemplate& TemplateLibrary::find(std::string_view id) const {
  for (const auto& t : templates) {
    if (t.id == id) return t;
  }
  throw TemplateError("unknown baseline template '" + std::string(id) + "'");
}

bool TemplateLibrary::contains(std::string_view id) const noexcept {
  return std::any_of(templates.begin(), templates.end(), [&](const auto& t) { return t.id == id; });
}

std::vector<std::string> TemplateLibrary::ids() const {
  std::vector<std::string> out;
  out.reserve(templates.size());
  for (const auto& t : templates) out.push_back(t.id);
  return out;
}

TemplateLibrary parse_templates(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw TemplateError(std::string("template file is not valid JSON: ") + e.what());
  }
  TemplateLibrary lib;
  if (doc.value("format", std::string{}) != "protonas-templates") {
    throw TemplateError("template file: \"format\" must be \"protonas-templates\"");
  }
  lib.version = doc.value("version", 0);
  if (lib.version != kTemplateFormatVersion) {
    throw TemplateError("template file: unsupported version " + std::to_string(lib.version));
  }
  const auto it = doc.find("templates");
  if (it == doc.end() || !it->is_array() || it->empty()) {
    throw TemplateError("template file: \"templates\" must be a non-empty list");
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    auto t = parse_template((*it)[i], "templates[" + std::to_string(i) + "]");
    if (lib.contains(t.id)) throw TemplateError("template file: duplicate id '" + t.id + "'");
    lib.templates.push_back(std::move(t));
  }
  return lib;
}

TemplateLibrary load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open template file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_templates(buffer.str());
  } catch (const TemplateError& e) {
    throw TemplateError(path.string() + ": " + e.what());
  }
}

const TemplateLibrary& builtin_templates() {
  static const TemplateLibrary lib = parse_templates(detail::kBuiltinTemplatesJson);
  return lib;
}

}  // namespace protonas
