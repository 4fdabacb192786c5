// SPDX-License-Identifier: Apache-2.0
#include "hiba/random.hpp"

#include <cmath>
#include <numbers>

namespace hiba {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

CounterRng CounterRng::split(std::uint64_t index) const {
  return CounterRng(mix64(key_ ^ mix64(index + 0x632be59bd9b4e019ULL)), 0);
}

std::uint64_t CounterRng::next_u64() {
  // Two rounds over (key, counter) decorrelate adjacent counters.
  return mix64(mix64(counter_++ ^ key_) + key_);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double CounterRng::normal() {
  // Box-Muller; one variate per call keeps the counter arithmetic simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace hiba
