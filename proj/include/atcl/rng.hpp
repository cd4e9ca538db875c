#pragma once

#include <cstdint>
#include <random>

namespace atcl {

/// Independent random streams derived from one master seed.
enum class Stream : std::uint64_t {
  kTask = 1,
  kClientData = 2,
  kTraining = 3,
  kParticipation = 4,
  kUpdateNoise = 5,
  kHoldout = 6,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based seed split: the result depends only on the arguments, never on
/// how many draws other streams have made, so client work can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ a);
  return mix64(h ^ (b + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  return Rng{derive_seed(master, stream, a, b)};
}

}  // namespace atcl
