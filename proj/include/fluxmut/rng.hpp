#pragma once

#include <cstdint>

#include "fluxmut/types.hpp"

namespace fluxmut {

/// Deterministic random source. All stochastic stages draw through this class
/// so that a run is fully determined by its seed regardless of platform or
/// standard-library version (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (cached pair).
  double normal();

  /// Uniform integer in [0, n).
  Index uniform_index(Index n);

  /// Child generator for stream `stream`; independent of sibling streams and
  /// of further draws from this generator.
  Rng split(std::uint64_t stream) const;

  void fill_normal(Matrix& m);
  void fill_uniform(Matrix& m, double lo, double hi);

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 step; used for seed expansion and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace fluxmut
