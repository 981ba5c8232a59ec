#include "protonas/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "protonas/error.hpp"

namespace protonas::cli {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kHssSalt = 0x6873732d73656564ULL;

void merge(ojson& base, const ojson& user, const std::string& path) {
  for (const auto& [key, value] : user.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(field + ": unknown field");
    auto& slot = base[key];
    if (slot.is_object() && value.is_object()) {
      merge(slot, value, field);
    } else if (slot.is_object()) {
      throw ConfigError(field + ": expected an object");
    } else {
      slot = value;
    }
  }
}

class Reader {
 public:
  explicit Reader(const ojson& root) : root_(root) {}

  const ojson& at(const std::string& path) const {
    const ojson* node = &root_;
    std::size_t start = 0;
    while (start <= path.size()) {
      const auto dot = path.find('.', start);
      const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      node = &node->at(key);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return *node;
  }

  bool is_null(const std::string& path) const { return at(path).is_null(); }

  long long integer(const std::string& path) const {
    const auto& v = at(path);
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()))) {
      return static_cast<long long>(v.get<double>());
    }
    throw ConfigError(path + ": expected an integer");
  }

  int int32(const std::string& path) const {
    const long long v = integer(path);
    if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(path + ": integer out of range");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned64(const std::string& path) const {
    const auto& v = at(path);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(path + ": expected a non-negative integer");
  }

  double real(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
  }

  std::string text(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
  }

  Interval interval(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(path + ": expected [lo, hi]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  std::vector<int> ints(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_array()) throw ConfigError(path + ": expected a list of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(path + ": expected a list of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_array()) throw ConfigError(path + ": expected a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(path + ": expected a list of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::vector<KernelStride> kernel_strides(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_array()) throw ConfigError(path + ": expected a list of [kernel, stride] pairs");
    std::vector<KernelStride> out;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
        throw ConfigError(path + ": expected a list of [kernel, stride] pairs");
      }
      out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    return out;
  }

 private:
  const ojson& root_;
};

std::string line_diagnostic(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

nlohmann::ordered_json default_config_json() {
  const SearchConfig s;
  const HssConfig h;
  ojson kernel_strides = ojson::array();
  for (const auto& ks : s.space.kernel_stride_values) kernel_strides.push_back({ks.kernel, ks.stride});
  ojson j;
  j["search"] = {{"trials", s.trials},
                 {"population_size", s.population_size},
                 {"base_seed", nullptr},
                 {"crossover_rate", s.crossover_rate},
                 {"mutation_rate", s.mutation_rate}};
  j["space"] = {{"baseline_pool", {"mbednet2d", "mobilenetv2", "resnet", "squeezenet"}},
                {"depth_values", s.space.depth_values},
                {"kernel_stride_values", kernel_strides},
                {"width_range", {s.space.width_range.lo, s.space.width_range.hi}},
                {"sparsity_range", {s.space.sparsity_range.lo, s.space.sparsity_range.hi}}};
  j["task"] = {{"dims", 2}, {"channels", 3}, {"height", 32}, {"width", 32}, {"length", nullptr}, {"num_classes", 10}};
  j["profile"] = {{"name", s.profile.name},
                  {"ram_max", s.profile.ram_max},
                  {"rom_max", s.profile.rom_max},
                  {"flops_max", s.profile.flops_max},
                  {"rom_overhead", s.profile.rom_overhead}};
  j["proxy"] = {{"batch_size", s.proxy.batch_size},
                {"num_batches_zico", s.proxy.num_batches_zico},
                {"epsilon_logdet", s.proxy.epsilon_logdet},
                {"epsilon_std", s.proxy.epsilon_std},
                {"epsilon_var", s.proxy.epsilon_var}};
  j["hss"] = {{"k", 5},
              {"population", h.population},
              {"mutation_rate", h.mutation_rate},
              {"generations", h.generations},
              {"stagnation", h.stagnation},
              {"seed", nullptr}};
  j["templates"] = nullptr;
  j["output_dir"] = "protonas-run";
  return j;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  ojson user;
  try {
    user = ojson::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + line_diagnostic(text, e.byte) + ": malformed JSON");
  }
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  ojson merged = default_config_json();
  merge(merged, user, "");

  const Reader r(merged);
  RunConfig cfg;
  try {
    auto& s = cfg.search;
    s.trials = r.int32("search.trials");
    s.population_size = r.int32("search.population_size");
    if (!r.is_null("search.base_seed")) cfg.base_seed = r.unsigned64("search.base_seed");
    s.crossover_rate = r.real("search.crossover_rate");
    s.mutation_rate = r.real("search.mutation_rate");

    s.space.baseline_pool = r.strings("space.baseline_pool");
    s.space.depth_values = r.ints("space.depth_values");
    s.space.kernel_stride_values = r.kernel_strides("space.kernel_stride_values");
    s.space.width_range = r.interval("space.width_range");
    s.space.sparsity_range = r.interval("space.sparsity_range");

    const int dims = r.int32("task.dims");
    const int channels = r.int32("task.channels");
    const int classes = r.int32("task.num_classes");
    if (dims == 1) {
      const int length = r.is_null("task.length") ? r.int32("task.width") : r.int32("task.length");
      s.task = TaskShape::series(channels, length, classes);
    } else {
      if (!r.is_null("task.length")) throw ConfigError("task.length: only valid for 1-D tasks");
      s.task = TaskShape::image(channels, r.int32("task.height"), r.int32("task.width"), classes);
      s.task.dims = dims;
    }

    s.profile.name = r.text("profile.name");
    s.profile.ram_max = r.integer("profile.ram_max");
    s.profile.rom_max = r.integer("profile.rom_max");
    s.profile.flops_max = r.integer("profile.flops_max");
    s.profile.rom_overhead = r.integer("profile.rom_overhead");

    s.proxy.batch_size = r.int32("proxy.batch_size");
    s.proxy.num_batches_zico = r.int32("proxy.num_batches_zico");
    s.proxy.epsilon_logdet = r.real("proxy.epsilon_logdet");
    s.proxy.epsilon_std = r.real("proxy.epsilon_std");
    s.proxy.epsilon_var = r.real("proxy.epsilon_var");

    cfg.k = r.int32("hss.k");
    cfg.hss.population = r.int32("hss.population");
    cfg.hss.mutation_rate = r.real("hss.mutation_rate");
    cfg.hss.generations = r.int32("hss.generations");
    cfg.hss.stagnation = r.int32("hss.stagnation");
    if (!r.is_null("hss.seed")) cfg.hss_seed = r.unsigned64("hss.seed");

    if (!r.is_null("templates")) {
      std::filesystem::path p = r.text("templates");
      cfg.templates = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    cfg.output_dir = r.text("output_dir");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.k < 1) throw ConfigError("hss.k: must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  ojson j = default_config_json();
  const auto& s = cfg.search;
  j["search"]["trials"] = s.trials;
  j["search"]["population_size"] = s.population_size;
  j["search"]["base_seed"] = cfg.base_seed ? ojson(*cfg.base_seed) : ojson(nullptr);
  j["search"]["crossover_rate"] = s.crossover_rate;
  j["search"]["mutation_rate"] = s.mutation_rate;
  j["space"]["baseline_pool"] = s.space.baseline_pool;
  j["space"]["depth_values"] = s.space.depth_values;
  ojson ks = ojson::array();
  for (const auto& v : s.space.kernel_stride_values) ks.push_back({v.kernel, v.stride});
  j["space"]["kernel_stride_values"] = ks;
  j["space"]["width_range"] = {s.space.width_range.lo, s.space.width_range.hi};
  j["space"]["sparsity_range"] = {s.space.sparsity_range.lo, s.space.sparsity_range.hi};
  j["task"]["dims"] = s.task.dims;
  j["task"]["channels"] = s.task.channels;
  if (s.task.dims == 1) {
    j["task"]["height"] = 1;
    j["task"]["width"] = s.task.width;
    j["task"]["length"] = s.task.width;
  } else {
    j["task"]["height"] = s.task.height;
    j["task"]["width"] = s.task.width;
  }
  j["task"]["num_classes"] = s.task.num_classes;
  j["profile"] = {{"name", s.profile.name},
                  {"ram_max", s.profile.ram_max},
                  {"rom_max", s.profile.rom_max},
                  {"flops_max", s.profile.flops_max},
                  {"rom_overhead", s.profile.rom_overhead}};
  j["proxy"] = {{"batch_size", s.proxy.batch_size},
                {"num_batches_zico", s.proxy.num_batches_zico},
                {"epsilon_logdet", s.proxy.epsilon_logdet},
                {"epsilon_std", s.proxy.epsilon_std},
                {"epsilon_var", s.proxy.epsilon_var}};
  j["hss"] = {{"k", cfg.k},
              {"population", cfg.hss.population},
              {"mutation_rate", cfg.hss.mutation_rate},
              {"generations", cfg.hss.generations},
              {"stagnation", cfg.hss.stagnation},
              {"seed", cfg.hss_seed ? ojson(*cfg.hss_seed) : ojson(nullptr)}};
  j["templates"] = cfg.templates ? ojson(cfg.templates->generic_string()) : ojson(nullptr);
  j.erase("output_dir");
  return j;
}

std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (cfg.base_seed) return *cfg.base_seed;
  if (const char* env = std::getenv("PROTONAS_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') throw ConfigError("PROTONAS_SEED: expected a non-negative integer");
    return v;
  }
  return 0;
}

std::uint64_t resolve_hss_seed(const RunConfig& cfg, std::uint64_t search_seed) {
  return cfg.hss_seed ? *cfg.hss_seed : derive_seed(search_seed, kHssSalt);
}

std::string config_hash(const nlohmann::ordered_json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

TemplateLibrary load_library(const RunConfig& cfg) {
  return cfg.templates ? load_templates(*cfg.templates) : builtin_templates();
}

void validate(const RunConfig& cfg) {
  cfg.search.check();
  cfg.hss.check();
  TemplateLibrary lib;
  try {
    lib = load_library(cfg);
  } catch (const Error& e) {
    throw ConfigError(std::string("templates: ") + e.what());
  }
  for (const auto& id : cfg.search.space.baseline_pool) {
    if (!lib.contains(id)) throw ConfigError("space.baseline_pool: unknown template '" + id + "'");
    if (lib.find(id).dims != cfg.search.task.dims) {
      throw ConfigError("space.baseline_pool: template '" + id + "' does not match task.dims");
    }
  }
}

}  // namespace protonas::cli
