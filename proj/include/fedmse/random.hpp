#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedmse {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a seed path, e.g. (run_seed, gateway, round).
/// Streams derived this way do not depend on scheduling order.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Stream tags keep independent consumers of one seed apart.
enum class Stream : std::uint64_t {
  Init = 1,
  Partition = 2,
  Split = 3,
  DevSet = 4,
  TestSet = 5,
  Select = 6,
  LocalTrain = 7,
  Synthetic = 8,
  Subsample = 9,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, Stream s,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  return derive_seed({base, static_cast<std::uint64_t>(s), a, b});
}

}  // namespace fedmse
