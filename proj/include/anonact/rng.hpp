#pragma once

#include <cstdint>
#include <string_view>

namespace anonact {

// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

// Seed keyed by a string, stable across platforms.
constexpr std::uint64_t text_seed(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = mix64(seed);
  for (char c : text) h = mix64(h ^ static_cast<unsigned char>(c));
  return h;
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <typename Engine>
double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace anonact
