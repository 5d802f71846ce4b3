#pragma once

#include <cstdint>
#include <random>

namespace smcmix {

/// Engine used everywhere. Each consumer receives an explicit handle; there is
/// no process-wide generator.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic stream split: distinct (master, stream) pairs give
/// statistically independent seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

// Stream tags reserved for the SMC driver. Particle lane j uses kLaneStreamBase + j.
inline constexpr std::uint64_t kInitStream = 0xA11CE00000000001ULL;
inline constexpr std::uint64_t kLaneStreamBase = 0x1000000000000000ULL;

}  // namespace smcmix
