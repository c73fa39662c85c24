#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cmm {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive combination of seed components, e.g. (global, node, t, stream).
constexpr std::uint64_t seed_hash(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) { return Rng(seed_hash(parts)); }

/// Stream tags keep the random draws of different stages independent.
enum class Stream : std::uint64_t {
  kInit = 1,
  kPredict = 2,
  kGnss = 3,
  kResample = 4,
  kFuse = 5,
  kTruth = 6,
  kWeights = 7,
  kPlacement = 8,
};

constexpr std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace cmm
