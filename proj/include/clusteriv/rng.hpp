#pragma once

#include <cstdint>
#include <random>

namespace clusteriv {

/// Substream derivation: stream b of master seed s is an mt19937_64 seeded
/// through seed_seq{s, b, golden-ratio constant}. Replicate streams are
/// therefore independent of execution order, so parallel and serial runs
/// of a Monte Carlo driver see identical draws.
///
/// Generator pinned to std::mt19937_64 plus the std <random> distributions
/// of this toolchain; same binary + same seed => bitwise-identical output.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream, std::uint64_t{0x9e3779b97f4a7c15ULL}};
  return std::mt19937_64(seq);
}

}  // namespace clusteriv
