#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "protonas/hvss.hpp"
#include "protonas/search.hpp"
#include "protonas/templates.hpp"

namespace protonas::cli {

struct RunConfig {
  SearchConfig search;
  std::optional<std::uint64_t> base_seed;  // unset: fall back to PROTONAS_SEED, then 0
  HssConfig hss;
  std::optional<std::uint64_t> hss_seed;  // unset: derived from the search seed
  int k = 5;
  std::optional<std::filesystem::path> templates;  // unset: built-in library
  std::filesystem::path output_dir = "protonas-run";
};

nlohmann::ordered_json default_config_json();

// Parses a config document (comments allowed) on top of the defaults.
// Throws ConfigError with a line or field diagnostic.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Fully resolved config as written to a run directory.
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Seed precedence: explicit override, config, PROTONAS_SEED, 0.
std::uint64_t resolve_seed(const RunConfig& cfg, std::optional<std::uint64_t> override_seed);
std::uint64_t resolve_hss_seed(const RunConfig& cfg, std::uint64_t search_seed);

// 16 hex digits of FNV-1a over the canonical dump.
std::string config_hash(const nlohmann::ordered_json& j);

TemplateLibrary load_library(const RunConfig& cfg);

// Throws ConfigError if the config cannot drive a run.
void validate(const RunConfig& cfg);

}  // namespace protonas::cli
