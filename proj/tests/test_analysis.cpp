#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "protonas/analysis.hpp"
#include "protonas/error.hpp"

namespace protonas {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("protonas-analysis-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CandidateRecord archived(std::size_t trial, Objectives o) {
  CandidateRecord r;
  r.trial_index = trial;
  r.seed = 1000 + trial;
  r.template_id = "mbednet2d";
  r.evaluated = true;
  r.feasibility = {true, 0.0};
  r.proxies = ProxyScores{-o[1], -o[2], -o[3], -o[4]};
  r.objectives = o;
  r.costs = {static_cast<std::int64_t>(o[0]), 100 + static_cast<std::int64_t>(trial), 50};
  r.genes.width_multiplier = 0.1 + 0.01 * static_cast<double>(trial);
  return r;
}

ParetoArchive sample_archive() {
  ParetoArchive a;
  a.add(archived(0, {100, -0.1, -3.25, -12.0, -0.5}));
  a.add(archived(1, {50, -0.3, -1.0 / 3.0, -11.0, -0.75}));
  a.add(archived(2, {200, -0.7, -2.0, -15.5, -0.125}));
  CandidateRecord bad;
  bad.trial_index = 3;
  bad.evaluated = true;
  a.add(bad);
  return a;
}

TEST(Kendall, IdenticalAndReversed) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> r{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau_b(x, x), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau_b(x, r), -1.0);
}

TEST(Kendall, OneSwap) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{1, 3, 2, 4};
  EXPECT_NEAR(kendall_tau_b(x, y), 4.0 / 6.0, 1e-15);
}

TEST(Kendall, MatchesPairCountingWithTies) {
  Rng rng(1);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 49);
    std::uniform_int_distribution<int> levels(0, rep % 3 == 0 ? 3 : 20);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = levels(rng);
      y[i] = levels(rng);
    }
    const auto got = try_kendall_tau_b(x, y);
    const bool degenerate = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
                            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (degenerate) {
      EXPECT_FALSE(got.has_value());
      continue;
    }
    ASSERT_TRUE(got.has_value());
    EXPECT_NEAR(*got, testing::brute_force_tau_b(x, y), 1e-12);
    EXPECT_NEAR(*got, kendall_tau_b(y, x), 1e-15);
  }
}

TEST(Kendall, NegationReverses) {
  Rng rng(2);
  std::normal_distribution<double> d;
  std::vector<double> x(30);
  for (auto& v : x) v = d(rng);
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  EXPECT_DOUBLE_EQ(kendall_tau_b(x, neg), -1.0);
}

TEST(Kendall, Errors) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 2};
  const std::vector<double> flat{4, 4, 4};
  EXPECT_THROW(kendall_tau_b(a, b), DimensionMismatch);
  EXPECT_THROW(kendall_tau_b(std::vector<double>{1}, std::vector<double>{1}), DimensionMismatch);
  EXPECT_THROW(kendall_tau_b(a, flat), DegenerateSeries);
  EXPECT_FALSE(try_kendall_tau_b(a, flat).has_value());
}

TEST(TauMatrix, IdenticalAndReversedSeries) {
  const std::vector<RankSeries> s{{"a", {1, 2, 3}}, {"b", {1, 2, 3}}, {"c", {3, 2, 1}}};
  const auto m = tau_matrix(s);
  EXPECT_EQ(m.labels, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_DOUBLE_EQ(*m.tau[0][1], 1.0);
  EXPECT_DOUBLE_EQ(*m.tau[1][0], 1.0);
  EXPECT_DOUBLE_EQ(*m.tau[0][2], -1.0);
  EXPECT_DOUBLE_EQ(*m.tau[2][2], 1.0);
}

TEST(TauMatrix, EqualsElementwiseRecomputation) {
  const auto a = sample_archive();
  const auto series = proxy_series(a.records);
  ASSERT_EQ(series.size(), 5u);
  EXPECT_EQ(series[0].label, "flops");
  const auto m = tau_matrix(series);
  for (std::size_t i = 0; i < series.size(); ++i) {
    EXPECT_EQ(series[i].values.size(), 3u);
    for (std::size_t j = 0; j < series.size(); ++j) {
      EXPECT_EQ(m.tau[i][j], try_kendall_tau_b(series[i].values, series[j].values));
    }
  }
}

TEST(TauMatrix, AccuracyCorrelation) {
  const std::vector<RankSeries> s{{"p", {1, 2, 3, 4}}, {"q", {4, 3, 2, 1}}, {"flat", {1, 1, 1, 1}}};
  const auto tau = accuracy_correlation(s, {"accuracy", {10, 20, 30, 40}});
  EXPECT_DOUBLE_EQ(*tau[0], 1.0);
  EXPECT_DOUBLE_EQ(*tau[1], -1.0);
  EXPECT_FALSE(tau[2].has_value());
}

TEST(Numbers, RoundTripFullPrecision) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / 7.0;
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(format_double(kWorstObjective)), kWorstObjective);
  EXPECT_THROW(parse_double("1.5x"), Error);
}

TEST(Csv, QuotedRoundTrip) {
  const auto dir = fresh_dir("csv");
  CsvTable t;
  t.header = {"a", "b,c", "d"};
  t.rows = {{"1", "say \"hi\"", ""}, {"x,y", "2", "3"}};
  write_csv(dir / "t.csv", t);
  const auto back = read_csv(dir / "t.csv");
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("d"), 2u);
  EXPECT_THROW(back.column("zzz"), std::out_of_range);
}

TEST(Csv, MissingFileNamesPath) {
  try {
    read_csv("/nonexistent/pareto.csv");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), "/nonexistent/pareto.csv");
  }
}

TEST(Report, ParetoTableRoundTripsObjectives) {
  const auto a = sample_archive();
  const auto t = pareto_table(a);
  EXPECT_EQ(t.rows.size(), a.pareto.size());
  EXPECT_EQ(t.header.front(), "trial");
  const auto dir = fresh_dir("roundtrip");
  write_csv(dir / "pareto.csv", t);
  const auto rows = objective_rows(read_csv(dir / "pareto.csv"));
  ASSERT_EQ(rows.size(), a.pareto.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& o = a.records[a.pareto[i]].objectives;
    EXPECT_EQ(rows[i], std::vector<double>(o.begin(), o.end()));
  }
}

TEST(Report, SelectionTableRowsAndPrefix) {
  const auto t = pareto_table(sample_archive());
  const std::vector<std::size_t> pick{2, 0};
  const auto s = selection_table(t, pick);
  EXPECT_EQ(s.header.front(), "pareto_row");
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_EQ(s.rows[0][0], "2");
  EXPECT_EQ(std::vector<std::string>(s.rows[0].begin() + 1, s.rows[0].end()), t.rows[2]);
}

TEST(Report, EmptyArchiveWritesHeaderAndNote) {
  ParetoArchive a;
  CandidateRecord r;
  r.evaluated = true;
  a.add(r);
  ReportInputs in;
  in.archive = &a;
  in.summary = summarize(a);
  in.tau = tau_matrix(proxy_series(a.records));
  const auto dir = fresh_dir("empty");
  export_report(in, dir);
  const auto pareto = read_csv(dir / "pareto.csv");
  EXPECT_TRUE(pareto.rows.empty());
  EXPECT_FALSE(pareto.header.empty());
  EXPECT_NE(slurp(dir / "summary.json").find("no feasible candidates"), std::string::npos);
}

TEST(Report, FiveRowSelectionAndIdempotence) {
  ParetoArchive a;
  for (std::size_t i = 0; i < 8; ++i) {
    const double t = static_cast<double>(i);
    a.add(archived(i, {100 + t, -t, -(8 - t), -t * t, -1.0}));
  }
  ASSERT_EQ(a.pareto.size(), 8u);
  ReportInputs in;
  in.archive = &a;
  in.selection = {0, 2, 4, 6, 7};
  in.tau = tau_matrix(proxy_series(a.records));
  in.summary = summarize(a);
  in.summary.selection_size = in.selection.size();
  const auto dir = fresh_dir("five");
  export_report(in, dir);
  EXPECT_EQ(read_csv(dir / "selection.csv").rows.size(), 5u);
  std::vector<std::string> first;
  for (const char* f : {"pareto.csv", "selection.csv", "tau.csv", "summary.json"}) first.push_back(slurp(dir / f));
  export_report(in, dir);
  std::size_t i = 0;
  for (const char* f : {"pareto.csv", "selection.csv", "tau.csv", "summary.json"}) EXPECT_EQ(slurp(dir / f), first[i++]) << f;
  EXPECT_NE(first[2].find("NA"), std::string::npos);  // the constant snip series
}

TEST(Report, SummaryCounts) {
  const auto s = summarize(sample_archive());
  EXPECT_EQ(s.trials_logged, 4u);
  EXPECT_EQ(s.evaluated, 4u);
  EXPECT_EQ(s.feasible, 3u);
  EXPECT_EQ(s.pareto_size, 3u);
  EXPECT_TRUE(s.notes.empty());
}

}  // namespace
}  // namespace protonas
