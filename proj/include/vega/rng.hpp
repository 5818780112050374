#pragma once

#include <cstdint>
#include <random>

namespace vega {

using Rng = std::mt19937_64;

// Independent generator streams derived from one run seed.
enum class Stream : std::uint64_t {
  Init = 1,
  VegaInit = 2,
  Dropout = 3,
  VegaDropout = 4,
  Anchors = 5,
  Shuffle = 6,
  Synth = 7,
  Split = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eed1234u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace vega
