#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qsd/network.hpp"
#include "qsd/paired_paths.hpp"
#include "qsd/rng.hpp"

namespace qsd {

enum class ProcessKind { poisson, diffusion };
enum class NoiseForm { rectangular, square };
enum class RandomnessMode { paired, free_running };

struct SimConfig {
  double volume = 1000.0;     // V
  double step = 1e-3;         // h
  std::int64_t t_steps = 500; // steps per segment, T = step * t_steps
  std::uint64_t seed = 0;
  RandomnessMode mode = RandomnessMode::free_running;
  int reservoir_thinning = 1;   // store every s-th recorded state
  double horizon_margin = 1.5;  // skeleton sizing factor over the deterministic clock

  double segment_time() const { return step * static_cast<double>(t_steps); }
  void validate() const;
};

// Cumulative internal intensity q_k = V h sum_m f_k(X_m), one entry per channel.
struct ChannelClock {
  Eigen::VectorXd q;
  explicit ChannelClock(int channels) : q(Eigen::VectorXd::Zero(channels)) {}
};

// Temporal occupation measure: the pool regeneration samples from.
// Only interior (accepted) states are recorded; with thinning s, every s-th
// recorded state is stored, which leaves sampling and histograms unbiased.
class OccupationReservoir {
 public:
  explicit OccupationReservoir(int thinning = 1);
  void record(const StateVector& x);
  // Entry floor(z * size) for z in (0,1).
  const StateVector& sample(double z) const;
  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }
  std::int64_t recorded() const { return recorded_; }
  const std::vector<StateVector>& states() const { return states_; }

 private:
  std::vector<StateVector> states_;
  std::int64_t recorded_ = 0;
  int thinning_ = 1;
};

// Shared pool of regeneration uniforms (Z_1, ..., Z_N) with separate
// counters for the Poisson and diffusion copies.
class RegenSequence {
 public:
  static RegenSequence generate(std::size_t n, RngStream& rng);
  // Z at the incremented counter of the given process; throws RegenExhausted.
  double next(ProcessKind which);
  void reset_counters() { next_x_ = next_y_ = 0; }
  std::size_t size() const { return uniforms_.size(); }
  std::size_t used(ProcessKind which) const {
    return which == ProcessKind::poisson ? next_x_ : next_y_;
  }

 private:
  std::vector<double> uniforms_;
  std::size_t next_x_ = 0;
  std::size_t next_y_ = 0;
};

// Randomness feeding one step: a skeleton set (paired mode) or an RNG stream
// (free mode). Exactly one must be set.
struct StepSources {
  const SkeletonSet* skeletons = nullptr;
  RngStream* rng = nullptr;
};

// Scratch buffers so the per-step hot path does not allocate.
struct SimWorkspace {
  Eigen::VectorXd f;
  Eigen::VectorXd variates;
  Eigen::VectorXd noise;
  Eigen::MatrixXd diff;
  Eigen::MatrixXd cov;
  StateVector clipped;
};

// One tau-leaping update of the Poisson process. Advances state and clock in
// place; returns true when the new state is absorbed.
bool tau_leap_step(const ReactionNetwork& net, StateVector& state, ChannelClock& clock,
                   const SimConfig& cfg, const StepSources& src, SimWorkspace& ws);

// Diffusion matrix M (d x K): column k equals l_k sqrt(V h f_k(state)).
Eigen::MatrixXd diffusion_matrix(const ReactionNetwork& net, const StateVector& state,
                                 const SimConfig& cfg);

// Symmetric PSD square root via spectral decomposition. Eigenvalues in
// [-1e-8, 0) are clipped to zero; anything below -1e-8 is rejected.
Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& n);

// One Euler-Maruyama update of the diffusion. Propensities are evaluated on
// max(state, 0) so an overshoot state cannot produce sqrt of a negative.
bool em_step(const ReactionNetwork& net, StateVector& state, ChannelClock& clock,
             const SimConfig& cfg, const StepSources& src, SimWorkspace& ws,
             NoiseForm form = NoiseForm::rectangular);

struct RunResult {
  std::int64_t regen_count = 0;
  StateVector final_state;
};

using TrajectorySink =
    std::function<void(std::int64_t step, double time, const StateVector& x, bool regenerated)>;

// Advances `steps` updates with regeneration from the occupation reservoir on
// absorption. The initial state is recorded into the reservoir first (it is
// part of the occupation measure). On absorption, the replacement is reservoir
// entry floor(Z * size); Z comes from `regen` when given (paired runs sharing
// a uniform pool), otherwise from `rng`. If the reservoir is empty the run
// initial state is reused and no Z is consumed.
RunResult simulate_with_regeneration(const ReactionNetwork& net, const SimConfig& cfg,
                                     ProcessKind kind, std::int64_t steps,
                                     const StateVector& initial,
                                     OccupationReservoir& reservoir, RegenSequence* regen,
                                     RngStream& rng, const SkeletonSet* skeletons = nullptr,
                                     NoiseForm form = NoiseForm::rectangular,
                                     const TrajectorySink& sink = nullptr);

// Classical RK4 on the mass-action drift; used for burn-in to the attractor.
StateVector integrate_drift(const ReactionNetwork& net, StateVector x, double dt,
                            std::int64_t steps);

// Interior point near the deterministic attractor of a preset, obtained by
// integrating the drift ODE.
StateVector preset_initial_state(const std::string& name);

// Skeleton cells per preset (internal-clock units).
double preset_skeleton_delta(const std::string& name);

// Deterministic per-channel internal-clock totals over one segment
// (Euler accumulation of V h f_k); used to size skeletons before a run.
Eigen::VectorXd estimate_channel_horizons(const ReactionNetwork& net, const StateVector& x0,
                                          const SimConfig& cfg);

// Skeleton length covering margin * (deterministic horizon) at cell width delta.
std::int64_t skeleton_length_for(const Eigen::VectorXd& horizons, double delta, double margin);

}  // namespace qsd
