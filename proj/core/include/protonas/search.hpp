#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protonas/archspace.hpp"
#include "protonas/costmodel.hpp"
#include "protonas/proxies.hpp"
#include "protonas/templates.hpp"

namespace protonas {

inline constexpr std::size_t kObjectiveCount = 5;
using Objectives = std::array<double, kObjectiveCount>;

// Objective placeholder for candidates whose proxies were not computed.
inline constexpr double kWorstObjective = 1.7976931348623157e308;

inline constexpr std::array<std::string_view, kObjectiveCount> kObjectiveNames{
    "flops", "neg_meco", "neg_zico", "neg_naswot", "neg_snip"};

struct CandidateRecord {
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  HyperparamVector genes;
  std::string template_id;
  bool evaluated = false;  // false when decoding or scoring failed
  std::string error;
  CostEstimate costs;
  Feasibility feasibility{false, kWorstObjective};
  std::optional<ProxyScores> proxies;  // only for feasible, evaluated candidates
  Objectives objectives{kWorstObjective, kWorstObjective, kWorstObjective, kWorstObjective, kWorstObjective};

  bool archivable() const noexcept { return evaluated && feasibility.feasible && proxies.has_value(); }
};

struct EvaluationContext {
  SearchSpaceDef space;
  TaskShape task;
  TargetProfile profile;
  ProxyBatchConfig proxy;
  const TemplateLibrary* templates = nullptr;
};

// decode -> static pruning -> costs -> feasibility -> proxies (feasible only).
CandidateRecord evaluate_candidate(const HyperparamVector& x, const EvaluationContext& ctx, std::uint64_t seed,
                                   std::size_t trial_index = 0);

bool pareto_dominates(const Objectives& a, const Objectives& b) noexcept;
bool constrained_dominates(const CandidateRecord& a, const CandidateRecord& b) noexcept;

// Fronts of indices into `records`, best first.
std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const CandidateRecord> records);

// Crowding distance of each member of `front`, in the same order.
std::vector<double> crowding_distance(std::span<const CandidateRecord> records, std::span<const std::size_t> front);

struct SearchConfig {
  int trials = 500;
  int population_size = 50;
  std::uint64_t base_seed = 0;
  double crossover_rate = 0.9;
  double mutation_rate = 1.0 / static_cast<double>(HyperparamVector::gene_count);
  int jobs = 1;  // concurrent evaluations; output does not depend on it
  SearchSpaceDef space;
  TaskShape task;
  TargetProfile profile;
  ProxyBatchConfig proxy;

  // Throws ConfigError.
  void check() const;
};

struct ParetoArchive {
  std::vector<CandidateRecord> records;  // every evaluation, by trial index
  std::vector<std::size_t> pareto;       // feasible non-dominated records, ascending

  // Inserts one record, keeping `pareto` consistent.
  void add(CandidateRecord r);
};

using TrialObserver = std::function<void(const CandidateRecord&)>;

ParetoArchive run_search(const SearchConfig& cfg, const TemplateLibrary& templates,
                         const TrialObserver& observer = {});

// Baseline: cfg.trials uniform samples, same evaluation pipeline.
ParetoArchive run_random_sampling(const SearchConfig& cfg, const TemplateLibrary& templates,
                                  const TrialObserver& observer = {});

// Evaluates `genes[i]` as trial `first_index + i` on up to `jobs` threads.
std::vector<CandidateRecord> evaluate_batch(std::span<const HyperparamVector> genes, const EvaluationContext& ctx,
                                            std::uint64_t base_seed, std::size_t first_index, int jobs);

}  // namespace protonas
