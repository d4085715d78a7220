#include "qsd/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "qsd/errors.hpp"

namespace qsd {

void SimConfig::validate() const {
  if (!(volume > 0.0)) throw ConfigError("volume must be positive");
  if (!(step > 0.0)) throw ConfigError("step size must be positive");
  if (t_steps < 1) throw ConfigError("t_steps must be >= 1");
  if (reservoir_thinning < 1) throw ConfigError("reservoir thinning must be >= 1");
  if (!(horizon_margin >= 1.0)) throw ConfigError("horizon margin must be >= 1");
}

OccupationReservoir::OccupationReservoir(int thinning) : thinning_(thinning) {
  if (thinning < 1) throw ConfigError("reservoir thinning must be >= 1");
}

void OccupationReservoir::record(const StateVector& x) {
  if (recorded_ % thinning_ == 0) states_.push_back(x);
  ++recorded_;
}

const StateVector& OccupationReservoir::sample(double z) const {
  if (states_.empty()) throw StructuralError("reservoir sample from empty reservoir");
  auto idx = static_cast<std::size_t>(z * static_cast<double>(states_.size()));
  if (idx >= states_.size()) idx = states_.size() - 1;
  return states_[idx];
}

RegenSequence RegenSequence::generate(std::size_t n, RngStream& rng) {
  RegenSequence seq;
  seq.uniforms_.resize(n);
  for (auto& u : seq.uniforms_) u = rng.uniform();
  return seq;
}

double RegenSequence::next(ProcessKind which) {
  std::size_t& counter = (which == ProcessKind::poisson) ? next_x_ : next_y_;
  if (counter >= uniforms_.size())
    throw RegenExhausted("regeneration pool of " + std::to_string(uniforms_.size()) +
                         " uniforms exhausted; configure a larger pool");
  return uniforms_[counter++];
}

namespace {

void check_sources(const StepSources& src, RandomnessMode mode) {
  if (mode == RandomnessMode::paired) {
    if (!src.skeletons) throw StructuralError("paired mode requires a skeleton set");
  } else if (!src.rng) {
    throw StructuralError("free mode requires an rng stream");
  }
}

}  // namespace

bool tau_leap_step(const ReactionNetwork& net, StateVector& state, ChannelClock& clock,
                   const SimConfig& cfg, const StepSources& src, SimWorkspace& ws) {
  check_sources(src, cfg.mode);
  const int K = net.reaction_count();
  net.propensities(state, ws.f);
  const double vh = cfg.volume * cfg.step;
  const double inv_v = 1.0 / cfg.volume;
  for (int k = 0; k < K; ++k) {
    const double q0 = clock.q[k];
    const double q1 = q0 + vh * ws.f[k];
    std::int64_t inc;
    if (cfg.mode == RandomnessMode::paired) {
      const PairedSkeleton& skel = src.skeletons->channels[static_cast<std::size_t>(k)];
      inc = static_cast<std::int64_t>(path_value(skel, PathKind::poisson, q1) -
                                      path_value(skel, PathKind::poisson, q0));
    } else {
      inc = src.rng->poisson(vh * ws.f[k]);
    }
    clock.q[k] = q1;
    if (inc != 0) state += net.stoich_vector(k) * (static_cast<double>(inc) * inv_v);
  }
  return in_absorbing(state, AbsorbKind::poisson);
}

Eigen::MatrixXd diffusion_matrix(const ReactionNetwork& net, const StateVector& state,
                                 const SimConfig& cfg) {
  const int d = net.dimension();
  const int K = net.reaction_count();
  Eigen::VectorXd f = net.propensities(state);
  Eigen::MatrixXd m(d, K);
  const double vh = cfg.volume * cfg.step;
  for (int k = 0; k < K; ++k) {
    if (f[k] < 0.0) throw StructuralError("diffusion_matrix: negative propensity");
    m.col(k) = net.stoich_vector(k) * std::sqrt(vh * f[k]);
  }
  return m;
}

Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& n) {
  if (n.rows() != n.cols()) throw NumericError("covariance_sqrt: matrix not square");
  if ((n - n.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw NumericError("covariance_sqrt: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (n.rows() <= 3) {
    es.computeDirect(n);
  } else {
    es.compute(n);
  }
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-8) throw NumericError("covariance_sqrt: eigenvalue below -1e-8, invalid covariance");
    lam[i] = lam[i] > 0.0 ? std::sqrt(lam[i]) : 0.0;
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

bool em_step(const ReactionNetwork& net, StateVector& state, ChannelClock& clock,
             const SimConfig& cfg, const StepSources& src, SimWorkspace& ws, NoiseForm form) {
  check_sources(src, cfg.mode);
  const int d = net.dimension();
  const int K = net.reaction_count();
  ws.clipped = state.cwiseMax(0.0);
  net.propensities(ws.clipped, ws.f);
  const double vh = cfg.volume * cfg.step;
  const double inv_v = 1.0 / cfg.volume;

  ws.noise.setZero(d);
  if (cfg.mode == RandomnessMode::paired) {
    for (int k = 0; k < K; ++k) {
      const double q0 = clock.q[k];
      const double q1 = q0 + vh * ws.f[k];
      const PairedSkeleton& skel = src.skeletons->channels[static_cast<std::size_t>(k)];
      const double dw = path_value(skel, PathKind::wiener, q1) -
                        path_value(skel, PathKind::wiener, q0);
      clock.q[k] = q1;
      ws.noise += net.stoich_vector(k) * (dw * inv_v);
    }
  } else if (form == NoiseForm::rectangular) {
    for (int k = 0; k < K; ++k) {
      const double w = src.rng->normal();
      ws.noise += net.stoich_vector(k) * (std::sqrt(vh * ws.f[k]) * w * inv_v);
      clock.q[k] += vh * ws.f[k];
    }
  } else {
    ws.cov.setZero(d, d);
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd& l = net.stoich_vector(k);
      ws.cov.noalias() += (vh * ws.f[k]) * (l * l.transpose());
      clock.q[k] += vh * ws.f[k];
    }
    ws.variates.resize(d);
    for (int i = 0; i < d; ++i) ws.variates[i] = src.rng->normal();
    ws.noise = covariance_sqrt(ws.cov) * ws.variates * inv_v;
  }

  for (int k = 0; k < K; ++k) state += net.stoich_vector(k) * (cfg.step * ws.f[k]);
  state += ws.noise;
  return in_absorbing(state, AbsorbKind::diffusion);
}

RunResult simulate_with_regeneration(const ReactionNetwork& net, const SimConfig& cfg,
                                     ProcessKind kind, std::int64_t steps,
                                     const StateVector& initial,
                                     OccupationReservoir& reservoir, RegenSequence* regen,
                                     RngStream& rng, const SkeletonSet* skeletons,
                                     NoiseForm form, const TrajectorySink& sink) {
  cfg.validate();
  if (steps < 1) throw ConfigError("simulate_with_regeneration: steps must be >= 1");
  if (in_absorbing(initial, AbsorbKind::poisson))
    throw ConfigError("simulate_with_regeneration: initial state must be interior");

  StepSources src;
  src.rng = &rng;
  src.skeletons = skeletons;

  StateVector state = initial;
  ChannelClock clock(net.reaction_count());
  SimWorkspace ws;
  RunResult result;
  reservoir.record(state);
  if (sink) sink(0, 0.0, state, false);

  for (std::int64_t n = 1; n <= steps; ++n) {
    const bool absorbed = (kind == ProcessKind::poisson)
                              ? tau_leap_step(net, state, clock, cfg, src, ws)
                              : em_step(net, state, clock, cfg, src, ws, form);
    bool regenerated = false;
    if (absorbed) {
      ++result.regen_count;
      regenerated = true;
      if (reservoir.empty()) {
        state = initial;
      } else {
        const double z = regen ? regen->next(kind) : rng.uniform();
        state = reservoir.sample(z);
      }
    }
    reservoir.record(state);
    if (sink) sink(n, cfg.step * static_cast<double>(n), state, regenerated);
  }
  result.final_state = state;
  return result;
}

StateVector integrate_drift(const ReactionNetwork& net, StateVector x, double dt,
                            std::int64_t steps) {
  StateVector k1, k2, k3, k4;
  for (std::int64_t n = 0; n < steps; ++n) {
    k1 = net.drift(x.cwiseMax(0.0));
    k2 = net.drift((x + 0.5 * dt * k1).cwiseMax(0.0));
    k3 = net.drift((x + 0.5 * dt * k2).cwiseMax(0.0));
    k4 = net.drift((x + dt * k3).cwiseMax(0.0));
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

StateVector preset_initial_state(const std::string& name) {
  const ReactionNetwork net = preset(name);
  StateVector x0(net.dimension());
  if (name == "sir") {
    x0 << 1.0, 1.0;
    return integrate_drift(net, x0, 1e-3, 20000);  // spirals into the endemic equilibrium
  }
  if (name == "oregonator") {
    x0 << 0.1, 0.02, 0.2;
    return integrate_drift(net, x0, 1e-7, 300000);  // lands on the relaxation oscillation
  }
  if (name == "lv4") {
    x0 << 0.3, 0.3, 0.3, 0.3;
    return integrate_drift(net, x0, 1e-3, 200000);  // chaotic attractor
  }
  throw ConfigError("unknown preset '" + name + "'");
}

double preset_skeleton_delta(const std::string& name) {
  if (name == "sir" || name == "lv4") return 0.01;
  if (name == "oregonator") return 0.001;
  throw ConfigError("unknown preset '" + name + "'");
}

Eigen::VectorXd estimate_channel_horizons(const ReactionNetwork& net, const StateVector& x0,
                                          const SimConfig& cfg) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(net.reaction_count());
  Eigen::VectorXd f;
  StateVector x = x0;
  const double vh = cfg.volume * cfg.step;
  for (std::int64_t n = 0; n < cfg.t_steps; ++n) {
    net.propensities(x.cwiseMax(0.0), f);
    q += vh * f;
    x += cfg.step * net.drift(x.cwiseMax(0.0));
  }
  return q;
}

std::int64_t skeleton_length_for(const Eigen::VectorXd& horizons, double delta, double margin) {
  const double needed = margin * horizons.maxCoeff();
  return std::max<std::int64_t>(64, static_cast<std::int64_t>(std::ceil(needed / delta)));
}

}  // namespace qsd
