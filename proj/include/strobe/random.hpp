#pragma once

#include <cstdint>
#include <random>

namespace strobe {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used only to derive well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream `stream` of the master seed. Traces are generated in
// fixed-size blocks, each with its own stream, so the output does not depend
// on how blocks are distributed over threads.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(splitmix64(stream)),
                    static_cast<std::uint32_t>(splitmix64(stream) >> 32),
                    static_cast<std::uint32_t>(splitmix64(seed ^ splitmix64(stream)))};
  return Rng(seq);
}

// Stream identifiers reserved for purposes other than per-block readout noise.
namespace streams {
inline constexpr std::uint64_t kJitter = 0xA11CE5ULL << 40;
inline constexpr std::uint64_t kPhaseNoise = 0xF00DULL << 40;
inline constexpr std::uint64_t kDesign = 0xDE5ULL << 40;
}  // namespace streams

}  // namespace strobe
