#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protonas/rng.hpp"

namespace protonas {

// Minimization orientation throughout.
using ObjectivePoint = std::vector<double>;

// Exact hypervolume dominated by `points` and bounded by `ref`. Points not
// strictly better than `ref` in every objective contribute nothing.
double hypervolume(std::span<const ObjectivePoint> points, const ObjectivePoint& ref);

// Fraction of uniform samples in [0, ref] dominated by some point, times the box volume.
double hv_monte_carlo(std::span<const ObjectivePoint> points, const ObjectivePoint& ref, std::size_t samples,
                      Rng& rng);

// Min-max normalization per objective over the set; constant objectives map to 0.
std::vector<ObjectivePoint> normalize_front(std::span<const ObjectivePoint> points);
ObjectivePoint uniform_reference(std::size_t dims, double value = 1.1);

class SubsetGene {
 public:
  SubsetGene() = default;
  SubsetGene(std::size_t size, int k) : bits_(size, 0), k_(k) {}

  static SubsetGene from_indices(std::size_t size, int k, std::span<const std::size_t> indices);

  std::size_t size() const noexcept { return bits_.size(); }
  int k() const noexcept { return k_; }
  bool test(std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t i, bool on = true) noexcept { bits_[i] = on ? 1 : 0; }
  std::size_t count() const noexcept;
  std::vector<std::size_t> indices() const;
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const SubsetGene&, const SubsetGene&) = default;

 private:
  std::vector<std::uint8_t> bits_;
  int k_ = 1;
};

double subset_hypervolume(std::span<const ObjectivePoint> points, std::span<const std::size_t> indices,
                          const ObjectivePoint& ref);

// Brings `g` to exactly g.k() set bits. Under-full genes greedily gain the
// point adding the most hypervolume; over-full genes keep the k bits whose
// individual removal loses the most. Ties go to the lower index.
SubsetGene repair(SubsetGene g, std::span<const ObjectivePoint> points, const ObjectivePoint& ref);

struct HssConfig {
  int population = 2000;
  double mutation_rate = 0.3;
  int generations = 10000;
  int stagnation = 500;  // stop after this many generations without improvement
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void check() const;
  friend bool operator==(const HssConfig&, const HssConfig&) = default;
};

struct SubsetResult {
  std::vector<std::size_t> indices;  // ascending
  double hypervolume = 0.0;          // on the normalized front
  int generations = 0;
};

// Evolutionary search for the k-subset of `points` with maximal hypervolume,
// after min-max normalization and a reference of 1.1 per objective.
SubsetResult select_subset(std::span<const ObjectivePoint> points, int k, const HssConfig& cfg);

// Optimum by enumeration over the same normalized problem; the first
// lexicographic subset wins ties.
SubsetResult exhaustive_subset(std::span<const ObjectivePoint> points, int k);

}  // namespace protonas
