#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protonas/archspace.hpp"

namespace protonas {

struct TargetProfile {
  std::string name = "imxrt1062-like";
  std::int64_t ram_max = 1 << 20;
  std::int64_t rom_max = 2 << 20;
  std::int64_t flops_max = 200'000'000;
  std::int64_t rom_overhead = 0;  // fixed code size added to every ROM estimate

  // Throws ConfigError.
  void check() const;
  friend bool operator==(const TargetProfile&, const TargetProfile&) = default;
};

struct CostEstimate {
  std::int64_t flops = 0;
  std::int64_t rom_bytes = 0;
  std::int64_t ram_bytes = 0;
  friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

struct Feasibility {
  bool feasible = true;
  double violation = 0.0;
  friend bool operator==(const Feasibility&, const Feasibility&) = default;
};

// int8 deployment layout.
struct QuantScheme {
  int weight_bytes = 1;
  int channel_meta_bytes = 8;  // per-output-channel scale and zero point
  int bias_bytes = 4;
  std::int64_t overhead = 0;
};

std::int64_t layer_flops(const LayerSpec& l, const FeatureShape& in, const FeatureShape& out, int dims);
std::int64_t count_flops(const ArchitectureGraph& g);

std::int64_t layer_rom(const LayerSpec& l, int dims, const QuantScheme& q = {});
std::int64_t estimate_rom(const ArchitectureGraph& g, const QuantScheme& q = {});

// Live activation bytes while each node executes, input buffer included.
std::vector<std::int64_t> ram_timeline(const ArchitectureGraph& g, int bytes_per_element = 1);
std::int64_t estimate_ram(const ArchitectureGraph& g, int bytes_per_element = 1);

CostEstimate estimate_costs(const ArchitectureGraph& g, const TargetProfile& profile);
Feasibility check(const CostEstimate& c, const TargetProfile& t) noexcept;

}  // namespace protonas
