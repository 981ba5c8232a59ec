#pragma once

#include <cstdint>
#include <random>

namespace protonas {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Stable per-trial seed; independent of evaluation order.
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial_index) noexcept;

// Derives an independent stream seed from a parent seed and a salt.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace protonas
