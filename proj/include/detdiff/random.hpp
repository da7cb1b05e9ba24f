#pragma once

#include <cstdint>
#include <random>

namespace detdiff {

/// Independent generator for one sample, keyed by (seed, stream, index).
/// Each sample gets its own engine, so results do not depend on how samples
/// are distributed over threads.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Explicit bit-to-double conversions; std::uniform_real_distribution is not
// reproducible across standard libraries.

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1p-53; }

/// Uniform on the open interval (-1/2, 1/2).
inline double uniform_centred_open(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1p-53 - 0.5;
}

}  // namespace detdiff
