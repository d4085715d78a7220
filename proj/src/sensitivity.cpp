#include "qsd/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "qsd/errors.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

namespace {

constexpr std::uint64_t kTagWarmup = 0x57524d55;  // warm-up stream
constexpr std::uint64_t kTagRegen = 0x5245474e;   // regeneration pool
constexpr std::uint64_t kTagSkel = 0x534b454c;    // per-segment skeleton seeds
constexpr std::uint64_t kTagBurn = 0x4255524e;    // coupling burn-in stream

StateVector regenerate_state(const OccupationReservoir& reservoir, const StateVector& fallback,
                             RegenSequence& regen, ProcessKind which) {
  if (reservoir.empty()) return fallback;
  return reservoir.sample(regen.next(which));
}

}  // namespace

FiniteTimeErrorEstimate finite_time_error(const ReactionNetwork& net, const SimConfig& cfg,
                                          std::int64_t m_segments, const StateVector& x0,
                                          const FteOptions& options) {
  cfg.validate();
  if (m_segments < 1) throw ConfigError("finite_time_error: need at least one segment");
  if (!(options.delta > 0.0)) throw ConfigError("finite_time_error: skeleton delta must be positive");
  if (in_absorbing(x0, AbsorbKind::poisson))
    throw ConfigError("finite_time_error: initial state must be interior");

  SimConfig paired_cfg = cfg;
  paired_cfg.mode = RandomnessMode::paired;
  SimConfig free_cfg = cfg;
  free_cfg.mode = RandomnessMode::free_running;

  OccupationReservoir res_x(cfg.reservoir_thinning);
  OccupationReservoir res_y(cfg.reservoir_thinning);

  // Warm-up: advance the Poisson chain alone so segment starts sample the
  // quasi-stationary regime and the reservoir is populated.
  RngStream warm_rng(derive_seed(cfg.seed, kTagWarmup, 0));
  StateVector start = x0;
  if (options.warmup_segments > 0) {
    const RunResult warm = simulate_with_regeneration(
        net, free_cfg, ProcessKind::poisson, options.warmup_segments * cfg.t_steps, x0, res_x,
        nullptr, warm_rng);
    start = warm.final_state;
  } else {
    res_x.record(start);
  }

  RngStream regen_rng(derive_seed(cfg.seed, kTagRegen, 0));
  RegenSequence regen = RegenSequence::generate(options.regen_pool, regen_rng);

  const int K = net.reaction_count();
  SkeletonSet skeletons;
  std::int64_t have_length = 0;

  StepSources paired_src;
  SimWorkspace ws_x, ws_y;

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t m = 0; m < m_segments; ++m) {
    const Eigen::VectorXd horizons = estimate_channel_horizons(net, start, cfg);
    const std::int64_t length = skeleton_length_for(horizons, options.delta, cfg.horizon_margin);
    if (!options.reuse_skeletons || length > have_length) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, kTagSkel, options.reuse_skeletons ? 0 : static_cast<std::uint64_t>(m));
      skeletons = generate_skeleton_set(options.delta, length, seed, K, options.scheme);
      have_length = length;
    }
    paired_src.skeletons = &skeletons;

    StateVector x = start;
    StateVector y = start;
    ChannelClock clock_x(K), clock_y(K);
    regen.reset_counters();
    res_x.record(x);
    res_y.record(y);

    try {
      for (std::int64_t n = 0; n < cfg.t_steps; ++n) {
        if (tau_leap_step(net, x, clock_x, paired_cfg, paired_src, ws_x))
          x = regenerate_state(res_x, start, regen, ProcessKind::poisson);
        if (em_step(net, y, clock_y, paired_cfg, paired_src, ws_y))
          y = regenerate_state(res_y, start, regen, ProcessKind::diffusion);
        res_x.record(x);
        res_y.record(y);
      }
    } catch (const HorizonExceeded& e) {
      throw HorizonExceeded(
          std::string(e.what()) + " (segment " + std::to_string(m + 1) + "; raise the horizon margin from " +
              std::to_string(cfg.horizon_margin) + " or enlarge the skeletons)",
          e.required_internal_time);
    }

    const double dist = std::min(1.0, (x - y).norm());
    sum += dist;
    sum_sq += dist * dist;
    start = x;  // next segment starts at the Poisson endpoint
  }

  FiniteTimeErrorEstimate est;
  est.segments = m_segments;
  est.t_horizon = cfg.segment_time();
  est.volume = cfg.volume;
  est.mean = sum / static_cast<double>(m_segments);
  if (m_segments > 1) {
    const double var =
        std::max(0.0, (sum_sq - static_cast<double>(m_segments) * est.mean * est.mean) /
                          static_cast<double>(m_segments - 1));
    est.std_error = std::sqrt(var / static_cast<double>(m_segments));
  }
  return est;
}

namespace {

void agresti_coull(std::int64_t successes, std::int64_t trials, const TailFitOptions& opt,
                   double& lower, double& upper) {
  const double z2 = opt.z * opt.z;
  const double n_tilde =
      opt.paper_compat_intervals ? static_cast<double>(successes) + z2 : static_cast<double>(trials) + z2;
  const double p_tilde = (static_cast<double>(successes) + 0.5 * z2) / n_tilde;
  const double half = opt.z * std::sqrt(p_tilde * (1.0 - p_tilde) / n_tilde);
  lower = std::max(0.0, p_tilde - half);
  upper = std::min(1.0, p_tilde + half);
}

}  // namespace

SurvivalCurve survival_curve(const std::vector<CouplingOutcome>& outcomes, double step,
                             const std::vector<double>& grid, const TailFitOptions& options) {
  if (grid.empty()) throw ConfigError("survival_curve: empty time grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("survival_curve: grid must be increasing");

  std::int64_t trials = 0;
  std::int64_t coupled = 0;
  for (const auto& o : outcomes) {
    if (o.status == CouplingStatus::extinct) continue;
    ++trials;
    if (o.status == CouplingStatus::coupled) ++coupled;
  }
  if (trials == 0) throw ConfigError("survival_curve: no non-extinct runs");
  if (coupled == 0) throw ConfigError("survival_curve: no coupled runs");

  SurvivalCurve curve;
  curve.trials = trials;
  curve.points.reserve(grid.size());
  for (const double t : grid) {
    SurvivalPoint pt;
    pt.t = t;
    for (const auto& o : outcomes) {
      if (o.status == CouplingStatus::extinct) continue;
      // censored runs survive every grid time within the run horizon
      const bool survives = (o.status == CouplingStatus::censored) ||
                            (static_cast<double>(o.tau_steps) * step > t);
      if (survives) ++pt.n_survivors;
    }
    pt.p = static_cast<double>(pt.n_survivors) / static_cast<double>(trials);
    agresti_coull(pt.n_survivors, trials, options, pt.p_lower, pt.p_upper);
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<double> default_survival_grid(const std::vector<CouplingOutcome>& outcomes,
                                          double step, int points, double quantile) {
  std::vector<double> coupled_times;
  for (const auto& o : outcomes)
    if (o.status == CouplingStatus::coupled)
      coupled_times.push_back(static_cast<double>(o.tau_steps) * step);
  if (coupled_times.empty()) throw ConfigError("default_survival_grid: no coupled runs");
  std::sort(coupled_times.begin(), coupled_times.end());
  const auto q_idx = static_cast<std::size_t>(
      quantile * static_cast<double>(coupled_times.size() - 1));
  const double t_max = std::max(coupled_times[q_idx], step * 2.0 * points);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        step + (t_max - step) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

TailFit fit_exponential_tail(const SurvivalCurve& curve, const TailFitOptions& options) {
  TailFit fit;
  const int n = static_cast<int>(curve.points.size());
  if (n < options.min_tail_points) {
    fit.diagnostic = "curve shorter than the minimum tail length";
    return fit;
  }
  for (int i0 = 0; i0 + options.min_tail_points <= n; ++i0) {
    // least squares of log p on t over i >= i0 (positive survival only)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (int i = i0; i < n; ++i) {
      const SurvivalPoint& pt = curve.points[static_cast<std::size_t>(i)];
      if (pt.n_survivors <= 0) continue;
      const double y = std::log(pt.p);
      sx += pt.t;
      sy += y;
      sxx += pt.t * pt.t;
      sxy += pt.t * y;
      ++m;
    }
    if (m < options.min_tail_points) break;
    const double det = static_cast<double>(m) * sxx - sx * sx;
    if (!(det > 0.0)) continue;
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / static_cast<double>(m);
    // the fitted curve must stay inside the confidence band from i0 on
    bool inside = true;
    for (int i = i0; i < n && inside; ++i) {
      const SurvivalPoint& pt = curve.points[static_cast<std::size_t>(i)];
      const double fitted = std::exp(intercept + slope * pt.t);
      inside = (fitted >= pt.p_lower && fitted <= pt.p_upper);
    }
    if (!inside) continue;
    fit.gamma = -slope;
    fit.intercept = intercept;
    fit.tail_start = i0;
    if (fit.gamma <= 0.0) {
      fit.diagnostic = "tail has no decay (rate <= 0)";
      return fit;
    }
    const SurvivalPoint& head = curve.points[static_cast<std::size_t>(i0)];
    const double width = head.p_upper - head.p_lower;
    fit.accepted = width < options.width_threshold;
    if (!fit.accepted)
      fit.diagnostic = "confidence band too wide at the tail start; collect more coupling runs";
    return fit;
  }
  fit.diagnostic =
      "no tail start satisfies the confidence band; run the coupling for longer";
  return fit;
}

BoundReport assemble_bound(const FiniteTimeErrorEstimate& fte, double gamma, double t_horizon) {
  if (!(t_horizon > 0.0)) throw ConfigError("assemble_bound: horizon must be positive");
  if (!(gamma > 0.0))
    throw DivergentBound("assemble_bound: contraction rate must be positive (alpha < 1 required)");
  BoundReport report;
  report.fte = fte;
  report.gamma = gamma;
  report.alpha = std::exp(-gamma * t_horizon);
  report.bound = fte.mean / (1.0 - report.alpha);
  report.volume = fte.volume;
  report.t_horizon = t_horizon;
  return report;
}

ContractionEstimate estimate_contraction(const ReactionNetwork& net, const SimConfig& cfg,
                                         std::int64_t m_runs, double distance_threshold,
                                         std::int64_t max_steps, std::int64_t burn_in_steps,
                                         const StateVector& x0, std::uint64_t seed,
                                         const TailFitOptions& tail_options) {
  SimConfig free_cfg = cfg;
  free_cfg.mode = RandomnessMode::free_running;
  OccupationReservoir pool(cfg.reservoir_thinning);
  RngStream burn_rng(derive_seed(seed, kTagBurn, 0));
  simulate_with_regeneration(net, free_cfg, ProcessKind::diffusion, burn_in_steps, x0, pool,
                             nullptr, burn_rng);

  ContractionEstimate est;
  est.distance_threshold = distance_threshold > 0.0
                               ? distance_threshold
                               : default_distance_threshold(net, cfg, x0);
  est.outcomes =
      collect_coupling_times(net, free_cfg, m_runs, est.distance_threshold, max_steps, pool, seed);
  est.curve = survival_curve(est.outcomes, cfg.step,
                             default_survival_grid(est.outcomes, cfg.step), tail_options);
  est.fit = fit_exponential_tail(est.curve, tail_options);
  return est;
}

BoundReport table_row(const TableRowConfig& config) {
  const ReactionNetwork net = preset(config.preset_name);
  const StateVector x0 = preset_initial_state(config.preset_name);

  SimConfig cfg;
  cfg.volume = config.volume;
  cfg.step = config.step;
  cfg.t_steps = std::max<std::int64_t>(1, std::llround(config.t_horizon / config.step));
  cfg.seed = config.seed;
  cfg.validate();

  FteOptions fte_opt = config.fte_options;
  fte_opt.delta = config.skeleton_delta > 0.0 ? config.skeleton_delta
                                              : preset_skeleton_delta(config.preset_name);
  const FiniteTimeErrorEstimate fte =
      finite_time_error(net, cfg, config.fte_segments, x0, fte_opt);

  const std::int64_t max_steps =
      config.coupling_max_steps > 0 ? config.coupling_max_steps : 40 * cfg.t_steps;
  const ContractionEstimate contraction = estimate_contraction(
      net, cfg, config.coupling_runs, config.distance_threshold, max_steps,
      config.burn_in_steps, x0, derive_seed(config.seed, 0x434f5550, 0), config.tail_options);
  if (!contraction.fit.accepted && contraction.fit.gamma <= 0.0)
    throw NumericError("table_row: tail fit failed: " + contraction.fit.diagnostic);

  BoundReport report = assemble_bound(fte, contraction.fit.gamma, cfg.segment_time());
  report.preset = config.preset_name;
  report.step = cfg.step;
  return report;
}

}  // namespace qsd
