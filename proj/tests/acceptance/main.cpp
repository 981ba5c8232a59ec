// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "graphs.hpp"
#include "oracles.hpp"
#include "protonas/analysis.hpp"
#include "protonas/cli/commands.hpp"
#include "protonas/cli/trial_log.hpp"
#include "protonas/costmodel.hpp"
#include "protonas/hvss.hpp"
#include "protonas/proxies.hpp"
#include "protonas/search.hpp"

namespace protonas::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::Point;

// Tolerances and budgets, fixed here so every run applies the same bar.
constexpr double kExactTolerance = 1e-12;
constexpr double kMonteCarloRelativeError = 0.01;
constexpr std::size_t kMonteCarloSamples = 1'000'000;
constexpr int kRandomFronts = 50;
constexpr std::size_t kMaxFrontSize = 20;
constexpr int kHssInstances = 24;
constexpr double kHssTolerance = 1e-9;
constexpr int kRepairGenes = 1000;
constexpr double kRepairTolerance = 1e-9;
constexpr int kGradientGraphs = 10;
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kGradientRelativeError = 1e-4;
constexpr int kKendallSeries = 1000;
constexpr double kKendallTolerance = 1e-12;
constexpr double kMecoTolerance = 1e-9;
constexpr double kNaswotTolerance = 1e-6;
constexpr int kProxyCandidates = 100;
constexpr int kSearchTrials = 500;
constexpr int kEffectivenessSeeds = 10;
constexpr int kEffectivenessWins = 8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<Point> random_front(Rng& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts(n, Point(d));
  for (auto& p : pts) {
    double s = 0.0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
  }
  return pts;
}

// 1. Hypervolume exactness.
Outcome hypervolume_exactness() {
  const double a = hypervolume(std::vector<Point>{{0.0, 0.0}}, Point{1.0, 1.0});
  const double b = hypervolume(std::vector<Point>{{0.0, 0.5}, {0.5, 0.0}}, Point{1.0, 1.0});
  bool ok = std::abs(a - 1.0) <= kExactTolerance && std::abs(b - 0.75) <= kExactTolerance;
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < kRandomFronts; ++i) {
    const std::size_t n = 1 + rng() % kMaxFrontSize;
    const auto pts = random_front(rng, n, 5);
    const Point ref(5, 1.1);
    const double exact = hypervolume(pts, ref);
    Rng mc(static_cast<std::uint64_t>(i) + 1);
    const double estimate = hv_monte_carlo(pts, ref, kMonteCarloSamples, mc);
    worst = std::max(worst, std::abs(estimate - exact) / exact);
  }
  ok = ok && worst <= kMonteCarloRelativeError;
  return {ok, "analytic " + fmt(a) + ", " + fmt(b) + "; worst MC relative error " + fmt(worst) + " over " +
                  std::to_string(kRandomFronts) + " 5-D fronts"};
}

// 2. HSS optimality against enumeration.
Outcome hss_optimality() {
  Rng rng(202);
  int matched = 0;
  double worst = 0.0;
  for (int i = 0; i < kHssInstances; ++i) {
    const std::size_t n = 6 + static_cast<std::size_t>(i % 7);
    const int k = 1 + i % 5;
    const auto pts = random_front(rng, n, 5);
    HssConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    const auto ga = select_subset(pts, k, cfg);
    const auto ex = exhaustive_subset(pts, k);
    const double gap = std::abs(ga.hypervolume - ex.hypervolume);
    worst = std::max(worst, gap);
    matched += gap <= kHssTolerance && ga.indices.size() == static_cast<std::size_t>(k);
  }
  return {matched == kHssInstances, std::to_string(matched) + "/" + std::to_string(kHssInstances) +
                                        " instances optimal; worst gap " + fmt(worst)};
}

// 3. Repair contract.
Outcome repair_contract() {
  Rng rng(303);
  int exact_k = 0;
  int over = 0;
  int under = 0;
  int not_worse = 0;
  const Point ref(5, 1.1);
  for (int i = 0; i < kRepairGenes; ++i) {
    const std::size_t n = 4 + rng() % 7;
    const auto pts = random_front(rng, n, 5);
    const int k = 1 + static_cast<int>(rng() % (n - 1));
    SubsetGene g(n, k);
    // Alternate over- and under-full genes.
    const bool overfull = i % 2 == 0;
    const std::size_t target = overfull ? static_cast<std::size_t>(k) + 1 + rng() % (n - static_cast<std::size_t>(k))
                                        : rng() % static_cast<std::size_t>(k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < target; ++j) g.set(order[j]);
    const auto r = repair(g, pts, ref);
    exact_k += r.count() == static_cast<std::size_t>(k);
    if (overfull) {
      ++over;
      const auto oracle = testing::keep_top_contributors(pts, g.indices(), static_cast<std::size_t>(k), ref);
      const double mine = testing::inclusion_exclusion_hypervolume(testing::subset_of(pts, r.indices()), ref);
      const double theirs = testing::inclusion_exclusion_hypervolume(testing::subset_of(pts, oracle), ref);
      not_worse += mine >= theirs - kRepairTolerance;
    } else {
      ++under;
    }
  }
  return {exact_k == kRepairGenes && not_worse == over,
          std::to_string(exact_k) + "/" + std::to_string(kRepairGenes) + " genes with exactly k bits (" +
              std::to_string(over) + " over-full, " + std::to_string(under) + " under-full); " +
              std::to_string(not_worse) + "/" + std::to_string(over) + " over-full repairs match the oracle HV"};
}

// 4. Gradient correctness.
Outcome gradient_correctness() {
  double worst = 0.0;
  std::size_t params = 0;
  bool sized = true;
  for (int v = 0; v < kGradientGraphs; ++v) {
    Rng rng(static_cast<std::uint64_t>(400 + v));
    const auto g = testing::random_small_graph(rng, v);
    const auto p = init_params(g, rng);
    sized = sized && g.nodes.size() <= 5 && p.parameter_count() <= 2000 && validate(g).empty();
    const auto batch = testing::gaussian_batch(g, 2, rng);
    const auto r = testing::check_gradients(g, p, batch, {1, 2}, kFiniteDifferenceStep);
    worst = std::max(worst, r.max_relative_error);
    params += r.parameters;
  }
  return {sized && worst <= kGradientRelativeError,
          "max relative error " + fmt(worst) + " over " + std::to_string(params) + " parameters in " +
              std::to_string(kGradientGraphs) + " graphs"};
}

// 5. Cost-model golden values.
Outcome cost_golden_values() {
  using testing::make_graph;
  using testing::make_layer;
  const auto conv = make_graph(2, {3, 32, 32}, 8, {make_layer(LayerKind::conv, {kGraphInput}, 3, 8, 3, 1, false)});
  const auto conv_bias = make_graph(2, {3, 32, 32}, 8, {make_layer(LayerKind::conv, {kGraphInput}, 3, 8, 3, 1, true)});
  const auto chain = make_graph(1, {1000, 1, 100}, 300,
                                {make_layer(LayerKind::conv, {kGraphInput}, 1000, 500, 1),
                                 make_layer(LayerKind::conv, {0}, 500, 300, 1)});
  const auto diamond = make_graph(1, {4, 1, 10}, 8,
                                  {make_layer(LayerKind::conv, {kGraphInput}, 4, 8, 1),
                                   make_layer(LayerKind::conv, {0}, 8, 16, 1),
                                   make_layer(LayerKind::conv, {1}, 16, 8, 1),
                                   make_layer(LayerKind::add, {0, 2}, 8, 8)});
  const auto flops = count_flops(conv);
  const auto rom = estimate_rom(conv_bias);
  const auto chain_ram = estimate_ram(chain);
  const auto diamond_ram = estimate_ram(diamond);
  const bool ok = flops == 442368 && rom == 312 && chain_ram == 150000 && diamond_ram == 320 &&
                  ram_timeline(diamond) == std::vector<std::int64_t>{120, 240, 320, 240};
  return {ok, "flops " + std::to_string(flops) + ", rom " + std::to_string(rom) + ", chain ram " +
                  std::to_string(chain_ram) + ", diamond ram " + std::to_string(diamond_ram)};
}

std::string run_config(int trials, std::uint64_t seed, const std::string& profile) {
  nlohmann::ordered_json j;
  j["search"] = {{"trials", trials}, {"base_seed", seed}};
  j["space"] = {{"baseline_pool", {"mbednet2d", "resnet"}}};
  j["task"] = {{"height", 32}, {"width", 32}};
  if (!profile.empty()) j["profile"] = nlohmann::json::parse(profile);
  return j.dump(2);
}

int run_pipeline(const fs::path& config, const fs::path& out, int jobs) {
  std::ostringstream sink;
  cli::CommandOptions o;
  o.config = config;
  o.out = out;
  o.jobs = jobs;
  const int explore = cli::cmd_explore(o, sink, std::cerr);
  if (explore == cli::kExitError) return explore;
  cli::CommandOptions rest;
  rest.out = out;
  if (explore == cli::kExitOk) {
    const int select = cli::cmd_select(rest, sink, std::cerr);
    if (select != cli::kExitOk) return select;
  }
  const int report = cli::cmd_report(rest, sink, std::cerr);
  return report == cli::kExitOk ? explore : report;
}

struct SoundnessCheck {
  bool ok = false;
  std::string detail;
};

SoundnessCheck check_soundness(const fs::path& run_dir, const TargetProfile& profile) {
  const auto log = cli::read_trial_log(run_dir / cli::kTrialLogFile);
  const auto archive = cli::replay(log);
  bool ok = log.size() == static_cast<std::size_t>(kSearchTrials);
  std::size_t violations = 0;
  std::size_t dominated = 0;
  std::size_t infeasible = 0;
  for (const auto& r : log) infeasible += r.evaluated && !r.feasibility.feasible;
  for (auto p : archive.pareto) {
    const auto& r = archive.records[p];
    const bool within = r.costs.flops <= profile.flops_max && r.costs.rom_bytes <= profile.rom_max &&
                        r.costs.ram_bytes <= profile.ram_max && r.archivable();
    violations += !within;
    for (const auto& other : log) dominated += constrained_dominates(other, r);
  }
  // pareto.csv must list exactly the archived trials.
  const auto csv = read_csv(run_dir / cli::kParetoFile);
  std::vector<std::size_t> csv_trials;
  for (const auto& row : csv.rows) csv_trials.push_back(std::stoul(row[csv.column("trial")]));
  std::vector<std::size_t> archived;
  for (auto p : archive.pareto) archived.push_back(archive.records[p].trial_index);
  ok = ok && violations == 0 && dominated == 0 && csv_trials == archived && !archived.empty();
  return {ok, std::to_string(log.size()) + " logged, " + std::to_string(infeasible) + " infeasible, " +
                  std::to_string(archive.pareto.size()) + " archived, " + std::to_string(violations) +
                  " constraint violations, " + std::to_string(dominated) + " dominated"};
}

struct SearchRuns {
  fs::path work;
  fs::path a;  // example profile, jobs 1
  fs::path b;  // example profile, jobs 3
  fs::path tight;
  bool ran = false;
  std::string error;
};

const std::string kTightProfile = R"({"name": "tight", "ram_max": 16384, "rom_max": 65536, "flops_max": 4000000})";

SearchRuns& search_runs(const fs::path& work) {
  static SearchRuns runs;
  if (runs.ran) return runs;
  runs.ran = true;
  runs.work = work;
  fs::create_directories(work);
  const auto example = work / "example.json";
  const auto tight = work / "tight.json";
  std::ofstream(example) << run_config(kSearchTrials, 2024, "");
  std::ofstream(tight) << run_config(kSearchTrials, 2024, kTightProfile);
  runs.a = work / "run-jobs1";
  runs.b = work / "run-jobs3";
  runs.tight = work / "run-tight";
  for (const auto& d : {runs.a, runs.b, runs.tight}) fs::remove_all(d);
  if (run_pipeline(example, runs.a, 1) != cli::kExitOk) runs.error = "example run jobs=1 failed";
  if (run_pipeline(example, runs.b, 3) != cli::kExitOk) runs.error = "example run jobs=3 failed";
  if (run_pipeline(tight, runs.tight, 1) != cli::kExitOk) runs.error = "tight run failed";
  return runs;
}

// 6. Search soundness.
Outcome search_soundness(const fs::path& work) {
  const auto& runs = search_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  const auto example = check_soundness(runs.a, TargetProfile{});
  TargetProfile tight;
  tight.ram_max = 16384;
  tight.rom_max = 65536;
  tight.flops_max = 4000000;
  const auto bound = check_soundness(runs.tight, tight);
  return {example.ok && bound.ok, "example profile: " + example.detail + "; tight profile: " + bound.detail};
}

// 7. Determinism across --jobs.
Outcome determinism(const fs::path& work) {
  const auto& runs = search_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  const std::vector<std::string> files{cli::kConfigFile, cli::kTrialLogFile, cli::kParetoFile,
                                       cli::kSelectionFile, cli::kSelectionJsonFile, cli::kTauFile,
                                       cli::kSummaryFile};
  std::vector<std::string> differing;
  for (const auto& f : files) {
    if (!fs::exists(runs.a / f) || slurp(runs.a / f) != slurp(runs.b / f)) differing.push_back(f);
  }
  std::string detail = std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
                       " files byte-identical between jobs=1 and jobs=3";
  for (const auto& f : differing) detail += "; differs: " + f;
  return {differing.empty(), detail};
}

// 8. Protocol shape echoed in the run summary.
Outcome protocol_shape(const fs::path& work) {
  const auto& runs = search_runs(work);
  if (!runs.error.empty()) return {false, runs.error};
  const auto summary = nlohmann::json::parse(slurp(runs.a / cli::kSummaryFile));
  const auto& p = summary.at("protocol");
  const auto selection = nlohmann::json::parse(slurp(runs.a / cli::kSelectionJsonFile));
  const bool ok = p.at("trials") == 500 && p.at("gene_count") == 14 && p.at("objective_count") == 5 &&
                  p.at("k") == 5 && p.at("hss_population") == 2000 && p.at("hss_mutation_rate") == 0.3 &&
                  p.at("hss_max_generations") == 10000 && summary.at("counts").at("trials_logged") == 500 &&
                  read_csv(runs.a / cli::kSelectionFile).rows.size() == 5 &&
                  selection.at("generations").get<int>() <= 10000;
  return {ok, "protocol " + p.dump() + "; selection rows " +
                  std::to_string(read_csv(runs.a / cli::kSelectionFile).rows.size()) + ", HSS generations " +
                  selection.at("generations").dump()};
}

// 9. Kendall tau-b.
Outcome kendall() {
  Rng rng(909);
  int matched = 0;
  int compared = 0;
  double worst = 0.0;
  for (int i = 0; i < kKendallSeries; ++i) {
    const std::size_t n = 2 + rng() % 49;
    std::uniform_int_distribution<int> level(0, 1 + static_cast<int>(rng() % 15));
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = level(rng);
      y[j] = level(rng);
    }
    const auto tau = try_kendall_tau_b(x, y);
    const bool constant = std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end() ||
                          std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
    if (constant) {
      matched += !tau.has_value();
      continue;
    }
    ++compared;
    const double gap = tau ? std::abs(*tau - testing::brute_force_tau_b(x, y)) : 1.0;
    worst = std::max(worst, gap);
    matched += gap <= kKendallTolerance;
  }
  std::normal_distribution<double> d;
  std::vector<double> x(40);
  for (auto& v : x) v = d(rng);
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  const double self = kendall_tau_b(x, x);
  const double reversed = kendall_tau_b(x, neg);
  const bool ok = matched == kKendallSeries && self == 1.0 && reversed == -1.0;
  return {ok, std::to_string(matched) + "/" + std::to_string(kKendallSeries) + " series agree (" +
                  std::to_string(compared) + " non-degenerate, worst gap " + fmt(worst) + "); tau(x,x) " +
                  fmt(self) + ", tau(x,-x) " + fmt(reversed)};
}

// 10. Proxy sanity.
Outcome proxy_sanity() {
  using testing::make_graph;
  using testing::make_layer;
  // Two identity 1x1 convs tapped on a Hadamard-coded input: every tap has
  // uncorrelated channels.
  auto tap1 = make_layer(LayerKind::conv, {kGraphInput}, 4, 4, 1);
  auto tap2 = make_layer(LayerKind::conv, {0}, 4, 4, 1);
  tap1.tap = tap2.tap = true;
  const auto meco_graph = make_graph(1, {4, 1, 8}, 2,
                                     {tap1, tap2, make_layer(LayerKind::global_avg_pool, {1}, 4, 4),
                                      make_layer(LayerKind::linear, {2}, 4, 2)});
  Rng rng(1010);
  auto params = init_params(meco_graph, rng);
  for (int l : {0, 1}) {
    auto& w = params.layers[static_cast<std::size_t>(l)].weight;
    w.fill(0.0);
    for (std::size_t c = 0; c < 4; ++c) w[c * 4 + c] = 1.0;
  }
  Tensor coded({4, 8});
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t x = 0; x < 8; ++x) coded[c * 8 + x] = std::popcount((c + 1) & x) % 2 == 0 ? 1.0 : -1.0;
  }
  const double meco_score = meco(meco_graph, params, coded);
  const bool meco_ok = std::abs(meco_score - 2.0) <= kMecoTolerance;

  // ReLU codes 1100 and 0011 from two opposite inputs.
  const auto relu_graph = make_graph(1, {4, 1, 1}, 2,
                                     {make_layer(LayerKind::relu, {kGraphInput}, 4, 4),
                                      make_layer(LayerKind::global_avg_pool, {0}, 4, 4),
                                      make_layer(LayerKind::linear, {1}, 4, 2)});
  const auto relu_params = init_params(relu_graph, rng);
  const Tensor codes({2, 4, 1}, std::vector<double>{1, 1, -1, -1, -1, -1, 1, 1});
  const double naswot_score = naswot(relu_graph, relu_params, codes);
  const bool naswot_ok = std::abs(naswot_score - 2.0 * std::log(4.0)) <= kNaswotTolerance;

  // Zero weights and the all-finite sweep over decoded candidates.
  SearchSpaceDef image;
  image.baseline_pool = {"mbednet2d", "mobilenetv2", "resnet", "squeezenet"};
  SearchSpaceDef series;
  series.baseline_pool = {"mbednet1d", "inception1d"};
  int finite = 0;
  bool snip_zero = true;
  const ProxyBatchConfig cfg;
  for (int i = 0; i < kProxyCandidates; ++i) {
    const bool use_series = i % 3 == 2;
    const auto& space = use_series ? series : image;
    const auto task = use_series ? TaskShape::series(3, 128, 10) : TaskShape::image(3, 32, 32, 10);
    const auto x = sample(rng, space);
    const auto g = apply_static_pruning(decode(x, space, builtin_templates(), task), x.pruning_sparsity);
    Rng eval(trial_seed(1010, static_cast<std::uint64_t>(i)));
    auto p = init_params(g, eval);
    const auto scores = evaluate_ensemble(g, p, cfg, eval);
    finite += scores.all_finite();
    if (i < 5) {
      for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        if (has_weights(g.nodes[n].kind)) p.layers[n].weight.fill(0.0);
      }
      const auto batch = random_batch(g, cfg.batch_size, eval);
      snip_zero = snip_zero && snip(g, p, batch, random_labels(cfg.batch_size, g.num_classes, eval)) == 0.0;
    }
  }
  const bool ok = meco_ok && naswot_ok && snip_zero && finite == kProxyCandidates;
  return {ok, "meco identity " + fmt(meco_score) + " (2 taps), naswot " + fmt(naswot_score) + " vs 2 ln 4, snip zero " +
                  (snip_zero ? "0" : "nonzero") + ", " + std::to_string(finite) + "/" +
                  std::to_string(kProxyCandidates) + " candidates finite"};
}

std::vector<Point> front_objectives(const ParetoArchive& a) {
  std::vector<Point> pts;
  for (auto p : a.pareto) pts.emplace_back(a.records[p].objectives.begin(), a.records[p].objectives.end());
  return pts;
}

// 11. Search effectiveness against random sampling.
Outcome search_effectiveness(int jobs) {
  int wins = 0;
  std::string per_seed;
  for (int s = 0; s < kEffectivenessSeeds; ++s) {
    SearchConfig cfg;
    cfg.trials = kSearchTrials;
    cfg.base_seed = static_cast<std::uint64_t>(s);
    cfg.jobs = jobs;
    cfg.space.baseline_pool = {"mbednet1d", "inception1d"};
    cfg.task = TaskShape::series(3, 64, 10);
    const auto evolved = front_objectives(run_search(cfg, builtin_templates()));
    const auto random = front_objectives(run_random_sampling(cfg, builtin_templates()));
    // Normalize both fronts over their union so they share one scale.
    std::vector<Point> joint = evolved;
    joint.insert(joint.end(), random.begin(), random.end());
    const auto norm = normalize_front(joint);
    const std::vector<Point> ne(norm.begin(), norm.begin() + static_cast<long>(evolved.size()));
    const std::vector<Point> nr(norm.begin() + static_cast<long>(evolved.size()), norm.end());
    const auto ref = uniform_reference(kObjectiveCount);
    const double he = hypervolume(ne, ref);
    const double hr = hypervolume(nr, ref);
    wins += he >= hr;
    per_seed += (s ? ", " : "") + std::string("seed ") + std::to_string(s) + " " + fmt(he) + " vs " + fmt(hr);
    std::cerr << "  effectiveness seed " << s << ": search " << he << " (|P|=" << evolved.size() << "), random " << hr
              << " (|P|=" << random.size() << ")\n";
  }
  return {wins >= kEffectivenessWins,
          std::to_string(wins) + "/" + std::to_string(kEffectivenessSeeds) + " seeds search >= random (" + per_seed + ")"};
}

}  // namespace
}  // namespace protonas::acceptance

int main(int argc, char** argv) {
  using namespace protonas::acceptance;
  CLI::App app{"protonas acceptance checks"};
  std::string work = "acceptance-work";
  std::vector<int> only;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--work-dir", work, "Scratch directory for search runs");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--jobs", jobs, "Concurrent evaluations for the effectiveness runs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, hypervolume_exactness},
      {2, hss_optimality},
      {3, repair_contract},
      {4, gradient_correctness},
      {5, cost_golden_values},
      {6, [&] { return search_soundness(work); }},
      {7, [&] { return determinism(work); }},
      {8, [&] { return protocol_shape(work); }},
      {9, kendall},
      {10, proxy_sanity},
      {11, [&] { return search_effectiveness(jobs); }},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << " ["
              << fmt(seconds) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
