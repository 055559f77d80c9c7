#pragma once

#include <cstdint>
#include <random>

#include "rbpf/geo.hpp"

namespace rbpf {

enum class RandomStream : std::uint32_t {
  kInit = 1,
  kPredict = 2,
  kResample = 3,
};

namespace detail {

// splitmix64 finalizer; folds the stream tuple into one well-mixed word
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Engine for one (seed, epoch, particle, purpose) tuple. Streams are
/// independent of evaluation order, so per-particle work can run in any order.
/// Seeding goes through a single mixed word; seed_seq costs more than the draws.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::int64_t epoch, std::int64_t index,
                                   RandomStream purpose) {
  std::uint64_t h = detail::mix64(seed);
  h = detail::mix64(h ^ static_cast<std::uint64_t>(epoch));
  h = detail::mix64(h ^ static_cast<std::uint64_t>(index));
  h = detail::mix64(h ^ static_cast<std::uint64_t>(purpose));
  return std::mt19937_64(h);
}

template <typename Engine>
Vec3 standard_normal3(Engine& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(eng);
  const double y = n(eng);
  const double z = n(eng);
  return {x, y, z};
}

}  // namespace rbpf
