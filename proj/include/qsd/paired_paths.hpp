#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qsd {

enum class PathKind { poisson, wiener };

// How the Poisson and Wiener grid paths are coupled.
//
// cellwise: one uniform per grid cell, Poisson increment = Poisson(delta)
//   quantile at U, Wiener increment = sqrt(delta) * normal quantile at U.
//   Simple, but per-cell mismatches accumulate like a random walk, so the
//   deviation P(s) - s - B(s) grows like sqrt(s).
//
// dyadic: quantile-couple the totals over the whole horizon, then refine by
//   recursive bisection (binomial count splits against Brownian-bridge
//   midpoints, one shared uniform per node). Mismatches at fine scales cancel
//   across levels and the deviation grows like log(s), which is the behavior
//   the strong-approximation bound describes. Default for all estimators.
enum class SkeletonScheme : std::uint8_t { cellwise = 0, dyadic = 1 };

// Coupled discretizations of a unit-rate Poisson path and a Wiener path on a
// common grid of `length` cells of width `delta` (internal-clock time units).
// Cumulative arrays have length+1 entries and start at 0.
struct PairedSkeleton {
  double delta = 0.0;
  std::int64_t length = 0;
  std::uint64_t seed = 0;
  int channel = 0;
  SkeletonScheme scheme = SkeletonScheme::dyadic;
  std::vector<std::int64_t> cum_poisson;
  std::vector<double> cum_wiener;

  double horizon() const { return delta * static_cast<double>(length); }
};

// The per-cell coupling kernel of the cellwise scheme, exposed for tests:
// given one uniform, returns {Poisson increment, Wiener increment}.
struct CellIncrements {
  std::int64_t poisson;
  double wiener;
};
CellIncrements cell_increments_from_uniform(double u, double delta);

PairedSkeleton generate_paired_skeleton(double delta, std::int64_t length,
                                        std::uint64_t seed,
                                        SkeletonScheme scheme = SkeletonScheme::dyadic);

// Piecewise-constant lookup at internal time s: value at index floor(s/delta).
// Throws HorizonExceeded (with the required horizon) when s > length*delta.
double path_value(const PairedSkeleton& skel, PathKind kind, double s);

struct KmtGammaEstimate {
  double gamma_hat = 0.0;
  double argmax_time = 0.0;
};

// Observable proxy for the strong-approximation constant: the maximum of
// |P(s) - s - B(s)| / log(max(s,2)) over grid points.
KmtGammaEstimate empirical_kmt_gamma(const PairedSkeleton& skel);

// One skeleton per reaction channel, common delta and horizon. Channel seeds
// are master_seed XOR channel index.
struct SkeletonSet {
  std::vector<PairedSkeleton> channels;
};
SkeletonSet generate_skeleton_set(double delta, std::int64_t length, std::uint64_t master_seed,
                                  int channel_count,
                                  SkeletonScheme scheme = SkeletonScheme::dyadic);

// Versioned binary cache; reload is bit-exact. Native little-endian layout.
void save_skeleton(const PairedSkeleton& skel, const std::string& path);
PairedSkeleton load_skeleton(const std::string& path);

}  // namespace qsd
