#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace protonas::cli {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitEmpty = 2 };

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> k;
  std::optional<std::filesystem::path> pareto;
  std::optional<std::filesystem::path> accuracy;
};

// File names inside a run directory.
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kTrialLogFile = "trials.jsonl";
inline constexpr const char* kParetoFile = "pareto.csv";
inline constexpr const char* kSelectionFile = "selection.csv";
inline constexpr const char* kSelectionJsonFile = "selection.json";
inline constexpr const char* kTauFile = "tau.csv";
inline constexpr const char* kAccuracyTauFile = "accuracy_tau.csv";
inline constexpr const char* kSummaryFile = "summary.json";

int cmd_explore(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_select(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_report(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_print_defaults(std::ostream& out);
int cmd_validate_config(const CommandOptions& opts, std::ostream& out, std::ostream& err);

// Rewrites summary.json from the files present in `run_dir`.
void write_run_summary(const std::filesystem::path& run_dir);

}  // namespace protonas::cli
