#pragma once

#include <cstdint>
#include <random>

namespace vsel {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; combines a base seed with stream indices so that
/// parallel replicas draw independent, reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

}  // namespace vsel
