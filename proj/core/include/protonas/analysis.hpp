#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "protonas/search.hpp"

namespace protonas {

struct RankSeries {
  std::string label;
  std::vector<double> values;
};

// Kendall tau-b with tie correction. Throws DimensionMismatch on unequal or
// too-short series and DegenerateSeries when either series is constant.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
// Same, with an empty result in place of DegenerateSeries.
std::optional<double> try_kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct TauMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> tau;
};

// Entries for series shorter than two observations, or constant ones, are empty.
TauMatrix tau_matrix(std::span<const RankSeries> series);

// Tau of every series against an external accuracy column.
std::vector<std::optional<double>> accuracy_correlation(std::span<const RankSeries> series,
                                                        const RankSeries& accuracy);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws std::out_of_range naming the column.
  std::size_t column(std::string_view name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// One row per archived record: trial, seed, template, genes, objectives, costs.
CsvTable pareto_table(const ParetoArchive& archive);
// Rows of `pareto` at `indices`, prefixed with their pareto row number.
CsvTable selection_table(const CsvTable& pareto, std::span<const std::size_t> indices);
CsvTable tau_table(const TauMatrix& tau);

// Objective columns (prefixed "obj_") of a table, or every column if none is prefixed.
std::vector<std::vector<double>> objective_rows(const CsvTable& table);

// Series over archivable records: flops and the four raw proxy scores.
std::vector<RankSeries> proxy_series(std::span<const CandidateRecord> records);

struct RunSummary {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t trials_logged = 0;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  std::size_t feasible = 0;
  std::size_t pareto_size = 0;
  std::size_t selection_size = 0;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, double>> protocol;  // echoed run parameters, in order
};

// Counts and notes derived from an archive.
RunSummary summarize(const ParetoArchive& archive);
void write_summary(const std::filesystem::path& path, const RunSummary& summary);

struct ReportInputs {
  const ParetoArchive* archive = nullptr;
  std::vector<std::size_t> selection;  // pareto row numbers
  TauMatrix tau;
  RunSummary summary;
};

// Writes pareto.csv, selection.csv, tau.csv and summary.json into `dir`.
void export_report(const ReportInputs& inputs, const std::filesystem::path& dir);

}  // namespace protonas
