#pragma once

// Deterministic random-number substreams.  All Monte Carlo sampling in the
// toolkit draws from engines derived from an explicit (seed, index) pair, so
// results depend only on the configuration and never on thread scheduling or
// wall-clock state.

#include <cstdint>
#include <random>

namespace epl::rng {

// splitmix64 finalizer; decorrelates nearby seeds and stream indices.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive a child seed for a nested sweep (one child per power point,
// experiment stage, ...).  Pure function of its arguments.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed + 0x632be59bd9b4e019ULL) ^ tag);
}

// Independent engine for stream `index` of `seed`.  Identical (seed, index)
// pairs always yield identical engines, regardless of the calling thread.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index));
  std::seed_seq seq{static_cast<unsigned>(a), static_cast<unsigned>(a >> 32),
                    static_cast<unsigned>(b), static_cast<unsigned>(b >> 32)};
  return std::mt19937_64(seq);
}

// Poisson draw with a real-valued mean; mean <= 0 yields 0 counts.
inline std::uint64_t poisson(double mean, std::mt19937_64& gen) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(gen);
}

}  // namespace epl::rng
