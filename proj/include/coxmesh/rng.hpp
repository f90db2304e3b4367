#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace coxmesh {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of ids,
/// e.g. stream_seed(master, {species, stratum, replicate, purpose}).
/// seed_0 = mix64(master); seed_{k+1} = mix64(seed_k ^ mix64(id_k + k + 1)).
inline std::uint64_t stream_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t s = mix64(master);
  std::uint64_t k = 0;
  for (std::uint64_t id : ids) {
    s = mix64(s ^ mix64(id + (++k)));
  }
  return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  return Rng(stream_seed(master, ids));
}

/// Purpose tags for stream derivation.
namespace stream {
inline constexpr std::uint64_t field = 1;
inline constexpr std::uint64_t pattern = 2;
inline constexpr std::uint64_t marks = 3;
inline constexpr std::uint64_t behaviors = 4;
inline constexpr std::uint64_t random_effects = 5;
inline constexpr std::uint64_t posterior = 6;
inline constexpr std::uint64_t envelope = 7;
inline constexpr std::uint64_t prediction = 8;
inline constexpr std::uint64_t scores = 9;
}  // namespace stream

}  // namespace coxmesh
