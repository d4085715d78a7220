#pragma once

#include <cstdint>
#include <random>

namespace qsd {

// Derives a decorrelated child seed from (master, tag, index). Replica and
// channel streams are created this way so that results do not depend on
// scheduling order: stream identity is part of the seed, never the draw order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index);

// One trajectory / one replica owns one stream. All variates are produced
// from uniforms of a single mt19937_64, so a run is reproducible from
// (master seed, stream id) alone.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t master, std::uint64_t stream_index);

  // Uniform on the open interval (0,1).
  double uniform();

  // Standard normal via the uniform quantile (one uniform per variate).
  double normal();

  // Exact Poisson(mean) draw. Inversion for small means, Hormann's PTRS
  // transformed rejection for large ones.
  std::int64_t poisson(double mean);

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace qsd
