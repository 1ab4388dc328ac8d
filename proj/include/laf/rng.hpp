#pragma once

#include <cstdint>
#include <random>

namespace laf {

using RngStream = std::mt19937_64;

// SplitMix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based per-trial seed derivation. For a fixed master seed the map
// index -> seed is a composition of bijections, so distinct trial indices
// can never collide, and results do not depend on which worker runs a trial.
inline constexpr std::uint64_t derive_trial_seed(std::uint64_t master_seed,
                                                 std::uint64_t trial_index) noexcept {
  return mix64(master_seed ^ mix64(trial_index));
}

inline RngStream make_stream(std::uint64_t seed) { return RngStream(seed); }

}  // namespace laf
