#pragma once

#include <cstdint>
#include <initializer_list>

namespace jmrp::rng {

/// SplitMix64 finalizer; a bijective mix of 64-bit values.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stable seed derivation from a root seed and a sequence of stream labels.
constexpr std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix(seed);
  for (auto label : labels) h = mix(h ^ mix(label + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform double in [0, 1) from the top 53 bits of a hash.
constexpr double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

}  // namespace jmrp::rng
