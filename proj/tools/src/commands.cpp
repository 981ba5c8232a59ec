#include "protonas/cli/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "protonas/analysis.hpp"
#include "protonas/cli/run_config.hpp"
#include "protonas/cli/trial_log.hpp"
#include "protonas/error.hpp"

namespace protonas::cli {

namespace fs = std::filesystem;

namespace {

RunConfig config_for(const CommandOptions& opts, const fs::path* run_dir = nullptr) {
  if (opts.config) return load_run_config(*opts.config);
  if (run_dir != nullptr && fs::exists(*run_dir / kConfigFile)) return load_run_config(*run_dir / kConfigFile);
  return parse_run_config("{}");
}

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitError;
}

}  // namespace

void write_run_summary(const fs::path& run_dir) {
  RunSummary s;
  if (fs::exists(run_dir / kConfigFile)) {
    const auto cfg = read_json(run_dir / kConfigFile);
    const nlohmann::ordered_json ordered = nlohmann::ordered_json::parse(cfg.dump());
    s.config_hash = config_hash(ordered);
    const auto& seed = cfg.at("search").at("base_seed");
    s.seed = seed.is_null() ? 0 : seed.get<std::uint64_t>();
    s.protocol = {
        {"trials", cfg.at("search").at("trials").get<double>()},
        {"population_size", cfg.at("search").at("population_size").get<double>()},
        {"gene_count", static_cast<double>(HyperparamVector::gene_count)},
        {"objective_count", static_cast<double>(kObjectiveCount)},
        {"k", cfg.at("hss").at("k").get<double>()},
        {"hss_population", cfg.at("hss").at("population").get<double>()},
        {"hss_mutation_rate", cfg.at("hss").at("mutation_rate").get<double>()},
        {"hss_max_generations", cfg.at("hss").at("generations").get<double>()},
        {"hss_stagnation", cfg.at("hss").at("stagnation").get<double>()},
    };
  }
  if (fs::exists(run_dir / kTrialLogFile)) {
    const auto archive = replay(read_trial_log(run_dir / kTrialLogFile));
    const auto counts = summarize(archive);
    s.trials_logged = counts.trials_logged;
    s.evaluated = counts.evaluated;
    s.failed = counts.failed;
    s.feasible = counts.feasible;
    s.pareto_size = counts.pareto_size;
    s.notes = counts.notes;
  }
  if (fs::exists(run_dir / kSelectionJsonFile)) {
    const auto sel = read_json(run_dir / kSelectionJsonFile);
    s.selection_size = sel.at("indices").size();
    if (sel.at("all_selected").get<bool>()) s.notes.emplace_back("k >= |P|: every pareto row selected");
  }
  write_summary(run_dir / kSummaryFile, s);
}

int cmd_explore(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = config_for(opts);
    cfg.base_seed = resolve_seed(cfg, opts.seed);
    if (opts.k) cfg.k = *opts.k;
    cfg.search.base_seed = *cfg.base_seed;
    cfg.search.jobs = opts.jobs ? *opts.jobs : default_jobs();
    validate(cfg);
    const fs::path dir = opts.out ? *opts.out : cfg.output_dir;
    ensure_dir(dir);
    for (const char* stale : {kSelectionFile, kSelectionJsonFile, kTauFile, kAccuracyTauFile}) {
      fs::remove(dir / stale);
    }
    write_text(dir / kConfigFile, to_json(cfg).dump(2) + "\n");

    const auto lib = load_library(cfg);
    std::ofstream log(dir / kTrialLogFile, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError((dir / kTrialLogFile).string(), "cannot open for writing");
    const auto archive = run_search(cfg.search, lib, [&](const CandidateRecord& r) {
      log << record_to_json(r).dump() << '\n';
    });
    log.close();
    if (!log) throw IoError((dir / kTrialLogFile).string(), "write failed");

    write_csv(dir / kParetoFile, pareto_table(archive));
    write_run_summary(dir);
    out << "explore: " << archive.records.size() << " trials, " << archive.pareto.size() << " on the Pareto front -> "
        << dir.string() << '\n';
    if (archive.pareto.empty()) {
      err << "warning: no feasible candidates\n";
      return static_cast<int>(kExitEmpty);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_select(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    fs::path dir;
    if (opts.out) {
      dir = *opts.out;
    } else if (opts.pareto) {
      dir = opts.pareto->parent_path().empty() ? fs::path(".") : opts.pareto->parent_path();
    } else {
      dir = config_for(opts).output_dir;
    }
    RunConfig cfg = config_for(opts, &dir);
    if (opts.k) cfg.k = *opts.k;
    if (cfg.k < 1) throw ConfigError("k: must be >= 1");
    cfg.hss.check();
    const std::uint64_t seed = resolve_seed(cfg, opts.seed);
    HssConfig hss = cfg.hss;
    hss.seed = resolve_hss_seed(cfg, seed);

    const fs::path pareto_path = opts.pareto ? *opts.pareto : dir / kParetoFile;
    const auto pareto = read_csv(pareto_path);
    const auto points = objective_rows(pareto);
    ensure_dir(dir);

    SubsetResult result;
    if (!points.empty()) result = select_subset(points, cfg.k, hss);
    const bool all = static_cast<std::size_t>(cfg.k) >= points.size();
    write_csv(dir / kSelectionFile, selection_table(pareto, result.indices));

    nlohmann::ordered_json sel;
    sel["k"] = cfg.k;
    sel["pareto_size"] = points.size();
    sel["all_selected"] = all;
    sel["hss_seed"] = hss.seed;
    sel["generations"] = result.generations;
    sel["hypervolume"] = result.hypervolume;
    sel["indices"] = result.indices;
    write_text(dir / kSelectionJsonFile, sel.dump(2) + "\n");
    write_run_summary(dir);

    if (points.empty()) {
      err << "warning: " << pareto_path.string() << " has no rows\n";
      return static_cast<int>(kExitEmpty);
    }
    out << "select: " << result.indices.size() << " of " << points.size() << " rows -> "
        << (dir / kSelectionFile).string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_report(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path dir = opts.out ? *opts.out : config_for(opts).output_dir;
    const fs::path log_path = dir / kTrialLogFile;
    if (!fs::exists(log_path)) throw IoError(log_path.string(), "trial log not found");
    const auto records = read_trial_log(log_path);

    const auto series = proxy_series(records);
    TauMatrix tau;
    if (series.front().values.size() >= 2) {
      tau = tau_matrix(series);
    } else {
      for (const auto& s : series) tau.labels.push_back(s.label);
      tau.tau.assign(series.size(), std::vector<std::optional<double>>(series.size()));
    }
    write_csv(dir / kTauFile, tau_table(tau));

    if (opts.accuracy) {
      const auto acc = read_csv(*opts.accuracy);
      const auto trial_col = acc.column("trial");
      const auto acc_col = acc.column("accuracy");
      std::map<std::size_t, double> accuracy;
      for (const auto& row : acc.rows) {
        accuracy[static_cast<std::size_t>(std::stoull(row[trial_col]))] = parse_double(row[acc_col]);
      }
      std::vector<CandidateRecord> matched;
      RankSeries acc_series{"accuracy", {}};
      for (const auto& r : records) {
        const auto it = accuracy.find(r.trial_index);
        if (!r.archivable() || it == accuracy.end()) continue;
        matched.push_back(r);
        acc_series.values.push_back(it->second);
      }
      CsvTable t;
      t.header = {"series", "tau", "n"};
      const auto matched_series = proxy_series(matched);
      std::vector<std::optional<double>> taus(matched_series.size());
      if (acc_series.values.size() >= 2) taus = accuracy_correlation(matched_series, acc_series);
      for (std::size_t i = 0; i < matched_series.size(); ++i) {
        t.rows.push_back({matched_series[i].label, taus[i] ? format_double(*taus[i]) : "NA",
                          std::to_string(acc_series.values.size())});
      }
      write_csv(dir / kAccuracyTauFile, t);
    }
    write_run_summary(dir);
    out << "report: " << records.size() << " trials -> " << (dir / kTauFile).string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_print_defaults(std::ostream& out) {
  out << default_config_json().dump(2) << '\n';
  return kExitOk;
}

int cmd_validate_config(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_for(opts);
    validate(cfg);
    out << "config ok\n";
    return static_cast<int>(kExitOk);
  });
}

}  // namespace protonas::cli
