#pragma once

#include <cstdint>
#include <string_view>

namespace slidesearch {

// FNV-1a, stable across platforms and standard libraries.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-stage / per-item seed: splitmix64(master ^ fnv1a(stage) ^
// splitmix64(fnv1a(item))). Every random draw in the pipeline goes through
// this, so re-running one stage reproduces the same numbers.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                    std::string_view item = {}) {
  return splitmix64(master ^ fnv1a(stage) ^ splitmix64(fnv1a(item)));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                    std::uint64_t index) {
  return splitmix64(master ^ fnv1a(stage) ^ splitmix64(index + 1));
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <typename Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace slidesearch
