// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hiba {

// Counter-based generator: output i is a pure function of (key, i), so
// streams can be split by index and replayed without shared state.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed);
  CounterRng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  /// Independent child stream; depends only on (key, index), not on counter.
  [[nodiscard]] CounterRng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

  friend bool operator==(const CounterRng&, const CounterRng&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace hiba
