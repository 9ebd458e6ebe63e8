#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace curvebench {

using RandomStream = std::mt19937_64;

/// FNV-1a over the bytes of `text`.
inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
{
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable child seed: independent of enumeration order and platform.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept
{
  return splitmix64(master ^ splitmix64(fnv1a64(label)));
}

} // namespace curvebench
