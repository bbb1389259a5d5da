#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace saleval {

// splitmix64 finalizer; used to derive independent stream seeds from (seed, tag, index).
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x51a7e5eedULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::initializer_list<std::uint64_t> parts) { return Engine(derive_seed(parts)); }

inline double uniform01(Engine& eng) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng); }

inline double gaussian(Engine& eng) { return std::normal_distribution<double>(0.0, 1.0)(eng); }

}  // namespace saleval
