#include "kronsolve/rng.hpp"

#include <cmath>

#include "kronsolve/errors.hpp"

namespace kronsolve {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
  // Two mixing rounds decorrelate (seed, stream) pairs that differ in one word.
  key_ = splitmix64(splitmix64(seed) ^ (0x6a09e667f3bcc909ULL + stream));
}

CounterRng CounterRng::substream(std::uint64_t index) const {
  CounterRng r(key_, 0x9e3779b97f4a7c15ULL ^ index);
  return r;
}

std::uint64_t CounterRng::next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

double CounterRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double CounterRng::gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // Polar Box-Muller; rejection keeps the transform exact.
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_gaussian_ = v * m;
  has_cached_gaussian_ = true;
  return u * m;
}

std::uint64_t CounterRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error("uniform_index: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

}  // namespace kronsolve
