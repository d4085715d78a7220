#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "qsd/network.hpp"
#include "qsd/rng.hpp"
#include "qsd/simulate.hpp"

namespace qsd {

// Two diffusion copies driven toward each other. Once coupled they are equal
// and stay equal (subsequent advances are synchronous).
struct CoupledPair {
  StateVector y1, y2;
  bool coupled = false;
  std::int64_t t = 0;
};

enum class CouplingStatus { coupled, extinct, censored };

struct CouplingOutcome {
  CouplingStatus status = CouplingStatus::censored;
  std::int64_t tau_steps = 0;             // valid when status == coupled
  std::int64_t reflection_fallbacks = 0;  // independent steps taken at singular points
};

// One-step Gaussian transition of the square-form Euler-Maruyama update:
// mean y + h sum_k l_k f_k(y), covariance (1/V^2) M M^T.
struct GaussianStepKernel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sqrt_cov;      // symmetric PSD factor, includes the 1/V scale
  Eigen::MatrixXd inv_sqrt_cov;
  double log_norm = 0.0;
  double min_sigma = 0.0;        // smallest singular value of sqrt_cov

  static GaussianStepKernel one_step(const ReactionNetwork& net, const SimConfig& cfg,
                                     const StateVector& y);
  double log_density(const Eigen::VectorXd& z) const;
  Eigen::VectorXd sample(RngStream& rng) const;
};

// Advances both copies one square-form EM step, reflecting y2's noise about
// the hyperplane orthogonal to the whitened separation. Returns false and
// leaves the pair untouched when the noise factor is near-singular (smallest
// singular value <= 1e-10); callers then substitute an independent step.
bool reflection_step(CoupledPair& pair, const ReactionNetwork& net, const SimConfig& cfg,
                     const Eigen::VectorXd& w);

// Both copies advance with fresh independent noise.
void independent_step(CoupledPair& pair, const ReactionNetwork& net, const SimConfig& cfg,
                      RngStream& rng);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;
using KernelSampler = std::function<Eigen::VectorXd(RngStream&)>;

struct MaximalCouplingResult {
  Eigen::VectorXd z1, z2;
  bool coupled = false;
};

// One-shot maximal coupling of two transition kernels: z1 ~ p1 always; with
// probability integral min(p1,p2) the copies meet at z1, otherwise z2 is
// drawn from the residual of p2 by rejection. Marginals are exact.
MaximalCouplingResult maximal_coupling_step(const LogDensity& log_p1, const KernelSampler& s1,
                                            const LogDensity& log_p2, const KernelSampler& s2,
                                            RngStream& rng);

// Hybrid scheme: reflection (or independent fallback) while the copies are
// farther apart than `distance_threshold`, maximal coupling attempts once
// they are close. Ends coupled, extinct (either copy absorbed first), or
// censored at max_steps.
CouplingOutcome hybrid_coupling_run(const ReactionNetwork& net, const SimConfig& cfg,
                                    CoupledPair pair, double distance_threshold,
                                    std::int64_t max_steps, RngStream& rng);

// Runs `m_runs` hybrid couplings with per-run independent streams; starting
// pairs are two independent draws from the burn-in reservoir.
std::vector<CouplingOutcome> collect_coupling_times(const ReactionNetwork& net,
                                                    const SimConfig& cfg, std::int64_t m_runs,
                                                    double distance_threshold,
                                                    std::int64_t max_steps,
                                                    const OccupationReservoir& start_pool,
                                                    std::uint64_t master_seed);

// Two one-step noise scales at the given state.
double default_distance_threshold(const ReactionNetwork& net, const SimConfig& cfg,
                                  const StateVector& center);

}  // namespace qsd
