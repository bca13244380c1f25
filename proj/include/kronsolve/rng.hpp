#pragma once

#include <cstdint>

namespace kronsolve {

// Counter-based generator: output i of stream (seed, stream) is a pure
// function of (seed, stream, i), so runs are reproducible and substreams
// can be split without coordination. The word function is SplitMix64
// applied to a mixed key; Gaussians use the polar Box-Muller transform on
// 53-bit uniforms. Cross-language ports can match distributions (not bit
// streams) by reusing these two choices.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  // Derives an independent substream, e.g. one per ensemble member.
  CounterRng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  // Uniform on [0,1) with 53 random bits.
  double uniform01();
  // Uniform on [lo,hi).
  double uniform(double lo, double hi);
  // Standard normal.
  double gaussian();
  // Integer in [0,n), n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

}  // namespace kronsolve
