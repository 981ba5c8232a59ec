#include "protonas/hvss.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "protonas/error.hpp"

namespace protonas {

namespace {

using PointRefs = std::vector<const double*>;

bool weakly_dominates(const double* a, const double* b, std::size_t d) noexcept {
  for (std::size_t j = 0; j < d; ++j) {
    if (a[j] > b[j]) return false;
  }
  return true;
}

double hv2(PointRefs pts, const double* ref) {
  std::sort(pts.begin(), pts.end(), [](const double* a, const double* b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
  });
  double area = 0.0, floor_y = ref[1];
  for (const double* p : pts) {
    if (p[1] < floor_y) {
      area += (ref[0] - p[0]) * (floor_y - p[1]);
      floor_y = p[1];
    }
  }
  return area;
}

// Sweep along the third objective over a 2-D staircase whose area is
// maintained incrementally.
double hv3(PointRefs pts, const double* ref) {
  std::sort(pts.begin(), pts.end(), [](const double* a, const double* b) { return a[2] < b[2]; });
  std::map<double, double> stairs;
  double area = 0.0, volume = 0.0;
  const double rx = ref[0], ry = ref[1];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i][0], y = pts[i][1];
    auto it = stairs.upper_bound(x);
    const bool dominated = it != stairs.begin() && std::prev(it)->second <= y;
    if (!dominated) {
      auto q = stairs.lower_bound(x);
      double cur_y = q == stairs.begin() ? ry : std::prev(q)->second;
      double pos = x, covered = 0.0;
      while (q != stairs.end() && q->second >= y) {
        covered += (q->first - pos) * (ry - cur_y);
        pos = q->first;
        cur_y = q->second;
        q = stairs.erase(q);
      }
      const double right = q == stairs.end() ? rx : q->first;
      covered += (right - pos) * (ry - cur_y);
      area += (right - x) * (ry - y) - covered;
      stairs.emplace_hint(q, x, y);
    }
    const double next_z = i + 1 < pts.size() ? pts[i + 1][2] : ref[2];
    volume += area * (next_z - pts[i][2]);
  }
  return volume;
}

double hv_refs(PointRefs pts, std::size_t d, const double* ref) {
  if (pts.empty()) return 0.0;
  if (d == 1) {
    double lo = ref[0];
    for (const double* p : pts) lo = std::min(lo, p[0]);
    return ref[0] - lo;
  }
  if (d == 2) return hv2(std::move(pts), ref);
  if (d == 3) return hv3(std::move(pts), ref);

  const std::size_t last = d - 1;
  std::sort(pts.begin(), pts.end(), [last](const double* a, const double* b) { return a[last] < b[last]; });
  PointRefs active;
  double volume = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double* p = pts[i];
    const bool covered = std::any_of(active.begin(), active.end(),
                                     [&](const double* a) { return weakly_dominates(a, p, last); });
    if (!covered) {
      std::erase_if(active, [&](const double* a) { return weakly_dominates(p, a, last); });
      active.push_back(p);
    }
    const double next = i + 1 < pts.size() ? pts[i + 1][last] : ref[last];
    if (next > p[last]) volume += hv_refs(active, last, ref) * (next - p[last]);
  }
  return volume;
}

PointRefs inside_reference(std::span<const ObjectivePoint> points, const ObjectivePoint& ref) {
  PointRefs refs;
  refs.reserve(points.size());
  for (const auto& p : points) {
    if (p.size() != ref.size()) throw DimensionMismatch("point dimension differs from reference dimension");
    bool inside = true;
    for (std::size_t j = 0; j < p.size(); ++j) inside = inside && p[j] < ref[j];
    if (inside) refs.push_back(p.data());
  }
  return refs;
}

using Words = std::vector<std::uint64_t>;

struct WordsHash {
  std::size_t operator()(const Words& w) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto x : w) h = mix64(h ^ x);
    return static_cast<std::size_t>(h);
  }
};

inline bool bit(const Words& w, std::size_t i) noexcept { return (w[i / 64] >> (i % 64)) & 1u; }
inline void set_bit(Words& w, std::size_t i, bool on) noexcept {
  const std::uint64_t m = std::uint64_t{1} << (i % 64);
  if (on) {
    w[i / 64] |= m;
  } else {
    w[i / 64] &= ~m;
  }
}
std::size_t popcount(const Words& w) noexcept {
  std::size_t c = 0;
  for (auto x : w) c += static_cast<std::size_t>(std::popcount(x));
  return c;
}

// Hypervolume of subsets of a fixed (already normalized) point set.
class SubsetEvaluator {
 public:
  SubsetEvaluator(std::span<const ObjectivePoint> points, const ObjectivePoint& ref, bool memoize)
      : points_(points), ref_(ref), memoize_(memoize) {
    for (const auto& p : points) {
      if (p.size() != ref.size()) throw DimensionMismatch("point dimension differs from reference dimension");
    }
  }

  double operator()(const Words& w) {
    if (memoize_) {
      if (auto it = memo_.find(w); it != memo_.end()) return it->second;
    }
    PointRefs refs;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!bit(w, i)) continue;
      const auto& p = points_[i];
      bool inside = true;
      for (std::size_t j = 0; j < p.size(); ++j) inside = inside && p[j] < ref_[j];
      if (inside) refs.push_back(p.data());
    }
    const double hv = hv_refs(std::move(refs), ref_.size(), ref_.data());
    if (memoize_) memo_.emplace(w, hv);
    return hv;
  }

  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::span<const ObjectivePoint> points_;
  const ObjectivePoint& ref_;
  bool memoize_;
  std::unordered_map<Words, double, WordsHash> memo_;
};

void repair_words(Words& w, std::size_t k, SubsetEvaluator& eval) {
  const std::size_t n = eval.size();
  std::size_t count = popcount(w);
  while (count < k) {
    std::size_t best = n;
    double best_hv = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (bit(w, i)) continue;
      set_bit(w, i, true);
      const double hv = eval(w);
      set_bit(w, i, false);
      if (hv > best_hv) {
        best_hv = hv;
        best = i;
      }
    }
    set_bit(w, best, true);
    ++count;
  }
  if (count > k) {
    // Loss of removing i alone is H(S) - H(S \ i); rank by H(S \ i) ascending.
    std::vector<std::pair<double, std::size_t>> without;
    for (std::size_t i = 0; i < n; ++i) {
      if (!bit(w, i)) continue;
      set_bit(w, i, false);
      without.emplace_back(eval(w), i);
      set_bit(w, i, true);
    }
    std::sort(without.begin(), without.end());
    for (std::size_t r = k; r < without.size(); ++r) set_bit(w, without[r].second, false);
  }
}

Words to_words(const SubsetGene& g) {
  Words w((g.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.test(i)) set_bit(w, i, true);
  }
  return w;
}

std::vector<std::size_t> word_indices(const Words& w, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (bit(w, i)) out.push_back(i);
  }
  return out;
}

void check_k(int k, std::size_t n) {
  if (k < 1) throw InfeasibleK("subset size k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    throw InfeasibleK("subset size k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " candidates");
  }
}

struct Individual {
  Words words;
  double fitness = 0.0;
};

bool fitter(const Individual& a, const Individual& b) {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  return a.words < b.words;
}

}  // namespace

double hypervolume(std::span<const ObjectivePoint> points, const ObjectivePoint& ref) {
  if (ref.empty()) throw DimensionMismatch("reference point must have at least one objective");
  return hv_refs(inside_reference(points, ref), ref.size(), ref.data());
}

double hv_monte_carlo(std::span<const ObjectivePoint> points, const ObjectivePoint& ref, std::size_t samples,
                      Rng& rng) {
  if (samples == 0) throw std::invalid_argument("hv_monte_carlo: samples must be >= 1");
  const auto refs = inside_reference(points, ref);
  if (refs.empty()) return 0.0;
  const std::size_t d = ref.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(d);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < d; ++j) u[j] = unit(rng) * ref[j];
    for (const double* p : refs) {
      if (weakly_dominates(p, u.data(), d)) {
        ++hits;
        break;
      }
    }
  }
  double box = 1.0;
  for (double r : ref) box *= r;
  return box * static_cast<double>(hits) / static_cast<double>(samples);
}

std::vector<ObjectivePoint> normalize_front(std::span<const ObjectivePoint> points) {
  std::vector<ObjectivePoint> out(points.begin(), points.end());
  if (out.empty()) return out;
  const std::size_t d = out.front().size();
  for (const auto& p : out) {
    if (p.size() != d) throw DimensionMismatch("points have differing dimensions");
  }
  for (std::size_t j = 0; j < d; ++j) {
    double lo = out.front()[j], hi = lo;
    for (const auto& p : out) {
      lo = std::min(lo, p[j]);
      hi = std::max(hi, p[j]);
    }
    const double span = hi - lo;
    for (auto& p : out) p[j] = span > 0.0 ? (p[j] - lo) / span : 0.0;
  }
  return out;
}

ObjectivePoint uniform_reference(std::size_t dims, double value) { return ObjectivePoint(dims, value); }

SubsetGene SubsetGene::from_indices(std::size_t size, int k, std::span<const std::size_t> indices) {
  SubsetGene g(size, k);
  for (auto i : indices) g.set(i);
  return g;
}

std::size_t SubsetGene::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SubsetGene::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

double subset_hypervolume(std::span<const ObjectivePoint> points, std::span<const std::size_t> indices,
                          const ObjectivePoint& ref) {
  std::vector<ObjectivePoint> subset;
  subset.reserve(indices.size());
  for (auto i : indices) subset.push_back(points[i]);
  return hypervolume(subset, ref);
}

SubsetGene repair(SubsetGene g, std::span<const ObjectivePoint> points, const ObjectivePoint& ref) {
  if (g.size() != points.size()) throw DimensionMismatch("gene length differs from point count");
  check_k(g.k(), points.size());
  SubsetEvaluator eval(points, ref, false);
  Words w = to_words(g);
  repair_words(w, static_cast<std::size_t>(g.k()), eval);
  return SubsetGene::from_indices(points.size(), g.k(), word_indices(w, points.size()));
}

void HssConfig::check() const {
  if (population < 2) throw ConfigError("hss.population: must be >= 2");
  if (!(mutation_rate > 0.0 && mutation_rate < 1.0)) throw ConfigError("hss.mutation_rate: must be in (0, 1)");
  if (generations < 0) throw ConfigError("hss.generations: must be >= 0");
  if (stagnation < 1) throw ConfigError("hss.stagnation: must be >= 1");
}

SubsetResult select_subset(std::span<const ObjectivePoint> points, int k, const HssConfig& cfg) {
  cfg.check();
  if (k < 1) throw InfeasibleK("subset size k must be >= 1");
  const auto normalized = normalize_front(points);
  const std::size_t n = normalized.size();
  const auto ref = uniform_reference(n ? normalized.front().size() : 0);
  SubsetResult result;
  if (static_cast<std::size_t>(k) >= n) {
    result.indices.resize(n);
    std::iota(result.indices.begin(), result.indices.end(), std::size_t{0});
    result.hypervolume = n ? hypervolume(normalized, ref) : 0.0;
    return result;
  }

  SubsetEvaluator eval(normalized, ref, true);
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t word_count = (n + 63) / 64;
  const std::uint64_t tail_mask = n % 64 == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << (n % 64)) - 1;
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto pop_size = static_cast<std::size_t>(cfg.population);

  auto finish = [&](Words w) {
    repair_words(w, kk, eval);
    const double f = eval(w);
    return Individual{std::move(w), f};
  };
  auto survive = [&](std::vector<Individual>& pool) {
    std::sort(pool.begin(), pool.end(), fitter);
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const Individual& a, const Individual& b) { return a.words == b.words; }),
               pool.end());
    if (pool.size() > pop_size) pool.resize(pop_size);
  };

  std::vector<Individual> pop;
  pop.reserve(2 * pop_size);
  const double p_bit = static_cast<double>(k) / static_cast<double>(n);
  for (std::size_t i = 0; i < pop_size; ++i) {
    Words w(word_count, 0);
    for (std::size_t b = 0; b < n; ++b) {
      if (unit(rng) < p_bit) set_bit(w, b, true);
    }
    pop.push_back(finish(std::move(w)));
  }
  survive(pop);

  std::uniform_int_distribution<std::size_t> any_bit(0, n - 1);
  auto tournament = [&]() -> const Individual& {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const std::size_t a = pick(rng), b = pick(rng);
    return pop[std::min(a, b)];  // pop is sorted best first
  };

  double best = pop.front().fitness;
  int stagnant = 0;
  int gen = 0;
  while (gen < cfg.generations && stagnant < cfg.stagnation) {
    std::vector<Individual> offspring;
    offspring.reserve(pop_size);
    for (std::size_t o = 0; o < pop_size; ++o) {
      const Individual& a = tournament();
      const Individual& b = tournament();
      Words child(word_count);
      for (std::size_t wi = 0; wi < word_count; ++wi) {
        const std::uint64_t mask = rng();
        child[wi] = (a.words[wi] & mask) | (b.words[wi] & ~mask);
      }
      child.back() &= tail_mask;
      if (unit(rng) < cfg.mutation_rate) {
        // Swap one member for one non-member.
        const std::size_t members = popcount(child);
        if (members > 0 && members < n) {
          std::size_t on = any_bit(rng), off = any_bit(rng);
          while (!bit(child, on)) on = any_bit(rng);
          while (bit(child, off)) off = any_bit(rng);
          set_bit(child, on, false);
          set_bit(child, off, true);
        }
      }
      offspring.push_back(finish(std::move(child)));
    }
    pop.insert(pop.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
    survive(pop);
    ++gen;
    if (pop.front().fitness > best) {
      best = pop.front().fitness;
      stagnant = 0;
    } else {
      ++stagnant;
    }
  }

  result.indices = word_indices(pop.front().words, n);
  result.hypervolume = pop.front().fitness;
  result.generations = gen;
  return result;
}

SubsetResult exhaustive_subset(std::span<const ObjectivePoint> points, int k) {
  const std::size_t n = points.size();
  check_k(k, n);
  const auto kk = static_cast<std::size_t>(k);
  double combos = 1.0;
  for (std::size_t i = 0; i < kk; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (combos > 1e6) throw InfeasibleK("exhaustive_subset: more than 1e6 subsets");

  const auto normalized = normalize_front(points);
  const auto ref = uniform_reference(normalized.front().size());
  SubsetEvaluator eval(normalized, ref, false);
  std::vector<std::size_t> idx(kk);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SubsetResult best;
  best.hypervolume = -1.0;
  Words w((n + 63) / 64);
  while (true) {
    std::fill(w.begin(), w.end(), 0);
    for (auto i : idx) set_bit(w, i, true);
    const double hv = eval(w);
    if (hv > best.hypervolume) {
      best.hypervolume = hv;
      best.indices = idx;
    }
    // Next combination in lexicographic order.
    std::size_t pos = kk;
    while (pos > 0 && idx[pos - 1] == n - kk + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < kk; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

}  // namespace protonas
