#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsd/coupling.hpp"
#include "qsd/network.hpp"
#include "qsd/simulate.hpp"

namespace qsd {

struct FiniteTimeErrorEstimate {
  double mean = 0.0;       // capped metric, so in [0,1]
  double std_error = 0.0;
  std::int64_t segments = 0;
  double t_horizon = 0.0;
  double volume = 0.0;
};

struct FteOptions {
  double delta = 0.01;              // skeleton cell width (internal clock)
  std::size_t regen_pool = 4096;    // shared uniform pool size N
  bool reuse_skeletons = false;     // one skeleton set for every segment
  std::int64_t warmup_segments = 10;  // discarded burn-in, 10 T by default
  SkeletonScheme scheme = SkeletonScheme::dyadic;
};

// Chained-segment estimator of the finite-time error
// E[min(1, |X_T - Y_T|)] under the paired update with shared regeneration
// uniforms. Segment m starts both processes at the Poisson chain's previous
// endpoint; occupation reservoirs carry across segments. Deterministic given
// (net, cfg, x0, options).
FiniteTimeErrorEstimate finite_time_error(const ReactionNetwork& net, const SimConfig& cfg,
                                          std::int64_t m_segments, const StateVector& x0,
                                          const FteOptions& options = {});

struct SurvivalPoint {
  double t = 0.0;
  std::int64_t n_survivors = 0;
  double p = 0.0;        // n_survivors / trials
  double p_lower = 0.0;  // Agresti-Coull bounds
  double p_upper = 0.0;
};

struct SurvivalCurve {
  std::vector<SurvivalPoint> points;
  std::int64_t trials = 0;  // non-extinct runs (conditional survival)
};

struct TailFitOptions {
  double z = 1.96;
  double width_threshold = 0.1;  // acceptance gate on the interval at the tail start
  bool paper_compat_intervals = false;  // literal n_i + z^2 trial count
  int min_tail_points = 4;
};

// Conditional survival of the coupling time on a time grid. Extinct runs are
// excluded; censored runs count as survivors at every grid time.
SurvivalCurve survival_curve(const std::vector<CouplingOutcome>& outcomes, double step,
                             const std::vector<double>& grid,
                             const TailFitOptions& options = {});

// Evenly spaced grid from `step` to the q-quantile of the coupled times.
std::vector<double> default_survival_grid(const std::vector<CouplingOutcome>& outcomes,
                                          double step, int points = 40, double quantile = 0.99);

struct TailFit {
  double gamma = 0.0;      // decay rate per unit time
  double intercept = 0.0;  // fitted log-survival at t = 0
  int tail_start = -1;     // i0, index into the curve; -1 when no fit found
  bool accepted = false;
  std::string diagnostic;
};

// Least-squares slope of log p vs t over i >= i0, with i0 the first index
// whose fitted curve stays inside the Agresti-Coull band at every later grid
// point. Accepted when such i0 exists, the rate is positive, and the band at
// i0 is narrower than the width threshold.
TailFit fit_exponential_tail(const SurvivalCurve& curve, const TailFitOptions& options = {});

struct BoundReport {
  FiniteTimeErrorEstimate fte;
  double gamma = 0.0;
  double alpha = 0.0;  // exp(-gamma T), must be < 1
  double bound = 0.0;  // fte.mean / (1 - alpha)
  std::string preset;
  double volume = 0.0;
  double step = 0.0;
  double t_horizon = 0.0;
  // First-order discretization terms are reported alongside, never added in.
  std::string footnote = "excludes O(h) time-discretization terms";
};

BoundReport assemble_bound(const FiniteTimeErrorEstimate& fte, double gamma, double t_horizon);

struct TableRowConfig {
  std::string preset_name;
  double volume = 1000.0;
  double step = 1e-3;
  double t_horizon = 0.5;
  std::int64_t fte_segments = 2000;
  std::int64_t coupling_runs = 5000;
  std::int64_t coupling_max_steps = 0;     // 0: 40 segment lengths
  std::int64_t burn_in_steps = 20000;
  double distance_threshold = 0.0;         // 0: two one-step noise scales
  double skeleton_delta = 0.0;             // 0: preset default
  std::uint64_t seed = 1;
  FteOptions fte_options;                  // delta overridden by skeleton_delta
  TailFitOptions tail_options;
};

struct ContractionEstimate {
  std::vector<CouplingOutcome> outcomes;
  SurvivalCurve curve;
  TailFit fit;
  double distance_threshold = 0.0;
};

// Algorithm pipeline: burn-in, coupling-time collection, survival curve,
// exponential tail fit.
ContractionEstimate estimate_contraction(const ReactionNetwork& net, const SimConfig& cfg,
                                         std::int64_t m_runs, double distance_threshold,
                                         std::int64_t max_steps, std::int64_t burn_in_steps,
                                         const StateVector& x0, std::uint64_t seed,
                                         const TailFitOptions& tail_options = {});

// One table row: finite-time error, contraction rate, assembled bound.
BoundReport table_row(const TableRowConfig& config);

}  // namespace qsd
