#include "protonas/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "protonas/engine.hpp"
#include "protonas/error.hpp"

namespace protonas {

namespace {

constexpr std::uint64_t kPopulationSalt = 0x70726f746f6e6173ULL;

void check_task(const TaskShape& t) {
  if (t.dims != 1 && t.dims != 2) throw ConfigError("task.dims: must be 1 or 2");
  if (t.channels < 1) throw ConfigError("task.channels: must be >= 1");
  if (t.width < 1 || t.height < 1) throw ConfigError("task: spatial extent must be >= 1");
  if (t.dims == 1 && t.height != 1) throw ConfigError("task.height: must be 1 for 1-D tasks");
  if (t.num_classes < 2) throw ConfigError("task.num_classes: must be >= 2");
}

void check_templates(const SearchSpaceDef& space, const TaskShape& task, const TemplateLibrary& templates) {
  for (const auto& id : space.baseline_pool) {
    if (!templates.contains(id)) throw ConfigError("space.baseline_pool: unknown template '" + id + "'");
    if (templates.find(id).dims != task.dims) {
      throw ConfigError("space.baseline_pool: template '" + id + "' does not match task.dims");
    }
  }
}

struct Ranking {
  std::vector<int> rank;
  std::vector<double> crowding;
};

// Rank and crowding distance for records[members[i]].
Ranking rank_members(const std::vector<CandidateRecord>& records, const std::vector<std::size_t>& members) {
  std::vector<CandidateRecord> view;
  view.reserve(members.size());
  for (auto m : members) view.push_back(records[m]);
  Ranking r;
  r.rank.assign(members.size(), 0);
  r.crowding.assign(members.size(), 0.0);
  const auto fronts = nondominated_sort(view);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    const auto cd = crowding_distance(view, fronts[f]);
    for (std::size_t i = 0; i < fronts[f].size(); ++i) {
      r.rank[fronts[f][i]] = static_cast<int>(f);
      r.crowding[fronts[f][i]] = cd[i];
    }
  }
  return r;
}

std::vector<std::size_t> environmental_selection(const std::vector<CandidateRecord>& records,
                                                 const std::vector<std::size_t>& pool, std::size_t keep) {
  std::vector<CandidateRecord> view;
  view.reserve(pool.size());
  for (auto m : pool) view.push_back(records[m]);
  std::vector<std::size_t> survivors;
  for (const auto& front : nondominated_sort(view)) {
    if (survivors.size() + front.size() <= keep) {
      for (auto i : front) survivors.push_back(pool[i]);
      continue;
    }
    const auto cd = crowding_distance(view, front);
    std::vector<std::size_t> order(front.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (cd[a] != cd[b]) return cd[a] > cd[b];
      return pool[front[a]] < pool[front[b]];
    });
    for (std::size_t i = 0; survivors.size() < keep; ++i) survivors.push_back(pool[front[order[i]]]);
    break;
  }
  return survivors;
}

class Variation {
 public:
  Variation(const SearchConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

  HyperparamVector crossover(const HyperparamVector& a, const HyperparamVector& b) {
    if (unit() >= cfg_.crossover_rate) return a;
    HyperparamVector c = a;
    if (coin()) c.architecture = b.architecture;
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (coin()) c.group_depth[g] = b.group_depth[g];
      if (coin()) c.kernel_stride[g] = b.kernel_stride[g];
    }
    if (coin()) c.width_multiplier = b.width_multiplier;
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (coin()) c.pruning_sparsity[g] = b.pruning_sparsity[g];
    }
    return c;
  }

  void mutate(HyperparamVector& x) {
    const auto& s = cfg_.space;
    if (hit()) x.architecture = pick(s.baseline_pool.size());
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (hit()) x.group_depth[g] = s.depth_values[static_cast<std::size_t>(pick(s.depth_values.size()))];
    }
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (hit()) x.kernel_stride[g] = pick(s.kernel_stride_values.size());
    }
    if (hit()) x.width_multiplier = step(x.width_multiplier, s.width_range);
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (hit()) x.pruning_sparsity[g] = step(x.pruning_sparsity[g], s.sparsity_range);
    }
  }

 private:
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool coin() { return unit() < 0.5; }
  bool hit() { return unit() < cfg_.mutation_rate; }
  int pick(std::size_t n) { return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_)); }
  double step(double v, const Interval& r) {
    const double sigma = 0.1 * r.span();
    if (sigma <= 0.0) return r.lo;
    return std::clamp(v + std::normal_distribution<double>(0.0, sigma)(rng_), r.lo, r.hi);
  }

  const SearchConfig& cfg_;
  Rng& rng_;
};

EvaluationContext make_context(const SearchConfig& cfg, const TemplateLibrary& templates) {
  cfg.check();
  check_templates(cfg.space, cfg.task, templates);
  return {cfg.space, cfg.task, cfg.profile, cfg.proxy, &templates};
}

void append(ParetoArchive& archive, std::vector<CandidateRecord> batch, const TrialObserver& observer) {
  for (auto& r : batch) {
    if (observer) observer(r);
    archive.add(std::move(r));
  }
}

}  // namespace

CandidateRecord evaluate_candidate(const HyperparamVector& x, const EvaluationContext& ctx, std::uint64_t seed,
                                   std::size_t trial_index) {
  if (ctx.templates == nullptr) throw ConfigError("evaluation context has no template library");
  CandidateRecord rec;
  rec.trial_index = trial_index;
  rec.seed = seed;
  rec.genes = x;
  if (x.architecture >= 0 && x.architecture < static_cast<int>(ctx.space.baseline_pool.size())) {
    rec.template_id = ctx.space.baseline_pool[static_cast<std::size_t>(x.architecture)];
  }
  try {
    const auto graph = apply_static_pruning(decode(x, ctx.space, *ctx.templates, ctx.task), x.pruning_sparsity);
    if (const auto issues = validate(graph); !issues.empty()) throw ShapeMismatch(issues.front());
    rec.costs = estimate_costs(graph, ctx.profile);
    rec.feasibility = check(rec.costs, ctx.profile);
    rec.objectives[0] = static_cast<double>(rec.costs.flops);
    if (rec.feasibility.feasible) {
      Rng rng(seed);
      const auto params = init_params(graph, rng);
      const auto scores = evaluate_ensemble(graph, params, ctx.proxy, rng);
      rec.proxies = scores;
      rec.objectives[1] = -scores.meco;
      rec.objectives[2] = -scores.zico;
      rec.objectives[3] = -scores.naswot;
      rec.objectives[4] = -scores.snip;
    }
    rec.evaluated = true;
  } catch (const Error& e) {
    rec.evaluated = false;
    rec.error = e.what();
    rec.feasibility = {false, kWorstObjective};
    rec.proxies.reset();
    rec.objectives.fill(kWorstObjective);
  }
  return rec;
}

bool pareto_dominates(const Objectives& a, const Objectives& b) noexcept {
  bool strictly = false;
  for (std::size_t i = 0; i < kObjectiveCount; ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly = true;
  }
  return strictly;
}

bool constrained_dominates(const CandidateRecord& a, const CandidateRecord& b) noexcept {
  const bool fa = a.feasibility.feasible, fb = b.feasibility.feasible;
  if (fa && !fb) return true;
  if (!fa && fb) return false;
  if (!fa) return a.feasibility.violation < b.feasibility.violation;
  return pareto_dominates(a.objectives, b.objectives);
}

std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const CandidateRecord> records) {
  const std::size_t n = records.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> counts(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (constrained_dominates(records[p], records[q])) {
        dominated[p].push_back(q);
      } else if (constrained_dominates(records[q], records[p])) {
        ++counts[p];
      }
    }
    if (counts[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto p : current) {
      for (auto q : dominated[p]) {
        if (--counts[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const CandidateRecord> records, std::span<const std::size_t> front) {
  const std::size_t n = front.size();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
    return distance;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t m = 0; m < kObjectiveCount; ++m) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto value = [&](std::size_t i) { return records[front[i]].objectives[m]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    distance[order.front()] = std::numeric_limits<double>::infinity();
    distance[order.back()] = std::numeric_limits<double>::infinity();
    const double span = value(order.back()) - value(order.front());
    if (!(span > 0.0) || !std::isfinite(span)) continue;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      distance[order[i]] += (value(order[i + 1]) - value(order[i - 1])) / span;
    }
  }
  return distance;
}

void SearchConfig::check() const {
  if (population_size < 2) throw ConfigError("search.population_size: must be >= 2");
  if (trials < population_size) throw ConfigError("search.trials: must be >= search.population_size");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("search.crossover_rate: must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("search.mutation_rate: must be in [0, 1]");
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");
  space.check();
  check_task(task);
  profile.check();
  proxy.check();
}

void ParetoArchive::add(CandidateRecord r) {
  const std::size_t index = records.size();
  records.push_back(std::move(r));
  const auto& rec = records.back();
  if (!rec.archivable()) return;
  for (auto m : pareto) {
    if (pareto_dominates(records[m].objectives, rec.objectives)) return;
  }
  std::erase_if(pareto, [&](std::size_t m) { return pareto_dominates(rec.objectives, records[m].objectives); });
  pareto.push_back(index);
}

std::vector<CandidateRecord> evaluate_batch(std::span<const HyperparamVector> genes, const EvaluationContext& ctx,
                                            std::uint64_t base_seed, std::size_t first_index, int jobs) {
  std::vector<CandidateRecord> out(genes.size());
  auto run = [&](std::size_t i) {
    const std::size_t trial = first_index + i;
    out[i] = evaluate_candidate(genes[i], ctx, trial_seed(base_seed, trial), trial);
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), genes.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < genes.size(); ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < genes.size(); i = next++) {
        try {
          run(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

ParetoArchive run_search(const SearchConfig& cfg, const TemplateLibrary& templates, const TrialObserver& observer) {
  const auto ctx = make_context(cfg, templates);
  Rng rng(derive_seed(cfg.base_seed, kPopulationSalt));
  Variation variation(cfg, rng);
  ParetoArchive archive;
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);

  std::vector<HyperparamVector> genes;
  for (std::size_t i = 0; i < pop_size; ++i) genes.push_back(sample(rng, cfg.space));
  append(archive, evaluate_batch(genes, ctx, cfg.base_seed, 0, cfg.jobs), observer);
  std::vector<std::size_t> population(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) population[i] = i;

  while (archive.records.size() < trials) {
    const auto ranking = rank_members(archive.records, population);
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    auto tournament = [&]() -> const HyperparamVector& {
      const std::size_t a = pick(rng), b = pick(rng);
      std::size_t winner = a;
      if (ranking.rank[b] < ranking.rank[a] ||
          (ranking.rank[b] == ranking.rank[a] && ranking.crowding[b] > ranking.crowding[a])) {
        winner = b;
      }
      return archive.records[population[winner]].genes;
    };

    const std::size_t first = archive.records.size();
    const std::size_t count = std::min(pop_size, trials - first);
    genes.clear();
    for (std::size_t c = 0; c < count; ++c) {
      const auto& a = tournament();
      const auto& b = tournament();
      auto child = variation.crossover(a, b);
      variation.mutate(child);
      genes.push_back(child);
    }
    append(archive, evaluate_batch(genes, ctx, cfg.base_seed, first, cfg.jobs), observer);

    std::vector<std::size_t> pool = population;
    for (std::size_t i = first; i < archive.records.size(); ++i) pool.push_back(i);
    population = environmental_selection(archive.records, pool, pop_size);
  }
  return archive;
}

ParetoArchive run_random_sampling(const SearchConfig& cfg, const TemplateLibrary& templates,
                                  const TrialObserver& observer) {
  const auto ctx = make_context(cfg, templates);
  Rng rng(derive_seed(cfg.base_seed, kPopulationSalt));
  ParetoArchive archive;
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const auto chunk = static_cast<std::size_t>(cfg.population_size);
  while (archive.records.size() < trials) {
    const std::size_t first = archive.records.size();
    std::vector<HyperparamVector> genes;
    for (std::size_t i = 0; i < std::min(chunk, trials - first); ++i) genes.push_back(sample(rng, cfg.space));
    append(archive, evaluate_batch(genes, ctx, cfg.base_seed, first, cfg.jobs), observer);
  }
  return archive;
}

}  // namespace protonas
