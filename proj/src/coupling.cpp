#include "qsd/coupling.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "qsd/errors.hpp"

namespace qsd {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kSingularFloor = 1e-10;

}  // namespace

GaussianStepKernel GaussianStepKernel::one_step(const ReactionNetwork& net, const SimConfig& cfg,
                                                const StateVector& y) {
  const int d = net.dimension();
  const StateVector clipped = y.cwiseMax(0.0);
  const Eigen::VectorXd f = net.propensities(clipped);
  const double vh = cfg.volume * cfg.step;

  GaussianStepKernel kernel;
  kernel.mean = y;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < net.reaction_count(); ++k) {
    const Eigen::VectorXd& l = net.stoich_vector(k);
    kernel.mean += (cfg.step * f[k]) * l;
    cov.noalias() += (vh * f[k]) * (l * l.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (d <= 3) {
    es.computeDirect(cov);
  } else {
    es.compute(cov);
  }
  const double inv_v = 1.0 / cfg.volume;
  Eigen::VectorXd sig(d);
  double log_det_sqrt = 0.0;
  double min_sigma = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    const double lam = std::max(es.eigenvalues()[i], 0.0);
    sig[i] = std::sqrt(lam) * inv_v;
    min_sigma = std::min(min_sigma, sig[i]);
    log_det_sqrt += std::log(std::max(sig[i], 1e-300));
  }
  kernel.sqrt_cov = es.eigenvectors() * sig.asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd inv_sig(d);
  for (int i = 0; i < d; ++i) inv_sig[i] = sig[i] > kSingularFloor ? 1.0 / sig[i] : 0.0;
  kernel.inv_sqrt_cov = es.eigenvectors() * inv_sig.asDiagonal() * es.eigenvectors().transpose();
  kernel.log_norm = -static_cast<double>(d) * kHalfLog2Pi - log_det_sqrt;
  kernel.min_sigma = min_sigma;
  return kernel;
}

double GaussianStepKernel::log_density(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd r = inv_sqrt_cov * (z - mean);
  return log_norm - 0.5 * r.squaredNorm();
}

Eigen::VectorXd GaussianStepKernel::sample(RngStream& rng) const {
  Eigen::VectorXd w(mean.size());
  for (int i = 0; i < w.size(); ++i) w[i] = rng.normal();
  return mean + sqrt_cov * w;
}

bool reflection_step(CoupledPair& pair, const ReactionNetwork& net, const SimConfig& cfg,
                     const Eigen::VectorXd& w) {
  if (pair.coupled) throw StructuralError("reflection_step: pair already coupled");
  const GaussianStepKernel k1 = GaussianStepKernel::one_step(net, cfg, pair.y1);
  const GaussianStepKernel k2 = GaussianStepKernel::one_step(net, cfg, pair.y2);
  if (k1.min_sigma <= kSingularFloor || k2.min_sigma <= kSingularFloor) return false;

  Eigen::VectorXd e = k2.inv_sqrt_cov * (pair.y1 - pair.y2);
  const double norm = e.norm();
  if (!(norm > 0.0)) throw StructuralError("reflection_step: copies coincide");
  e /= norm;
  const Eigen::VectorXd reflected = w - 2.0 * e.dot(w) * e;
  pair.y1 = k1.mean + k1.sqrt_cov * w;
  pair.y2 = k2.mean + k2.sqrt_cov * reflected;
  ++pair.t;
  return true;
}

void independent_step(CoupledPair& pair, const ReactionNetwork& net, const SimConfig& cfg,
                      RngStream& rng) {
  const GaussianStepKernel k1 = GaussianStepKernel::one_step(net, cfg, pair.y1);
  const GaussianStepKernel k2 = GaussianStepKernel::one_step(net, cfg, pair.y2);
  pair.y1 = k1.sample(rng);
  pair.y2 = k2.sample(rng);
  ++pair.t;
}

MaximalCouplingResult maximal_coupling_step(const LogDensity& log_p1, const KernelSampler& s1,
                                            const LogDensity& log_p2, const KernelSampler& s2,
                                            RngStream& rng) {
  MaximalCouplingResult out;
  out.z1 = s1(rng);
  const double u = rng.uniform();
  if (std::log(u) + log_p1(out.z1) < log_p2(out.z1)) {
    out.z2 = out.z1;
    out.coupled = true;
    return out;
  }
  for (std::int64_t it = 0; it < 1000000; ++it) {
    out.z2 = s2(rng);
    const double v = rng.uniform();
    if (std::log(v) + log_p2(out.z2) >= log_p1(out.z2)) return out;
  }
  throw NumericError(
      "maximal_coupling_step: residual rejection loop exceeded 1e6 iterations "
      "(densities nearly identical)");
}

CouplingOutcome hybrid_coupling_run(const ReactionNetwork& net, const SimConfig& cfg,
                                    CoupledPair pair, double distance_threshold,
                                    std::int64_t max_steps, RngStream& rng) {
  cfg.validate();
  if (!(distance_threshold > 0.0))
    throw ConfigError("hybrid_coupling_run: distance threshold must be positive");
  CouplingOutcome out;
  for (;;) {
    if (pair.coupled || (pair.y1.array() == pair.y2.array()).all()) {
      out.status = CouplingStatus::coupled;
      out.tau_steps = pair.t;
      return out;
    }
    if (in_absorbing(pair.y1, AbsorbKind::diffusion) ||
        in_absorbing(pair.y2, AbsorbKind::diffusion)) {
      out.status = CouplingStatus::extinct;
      return out;
    }
    if (pair.t >= max_steps) {
      out.status = CouplingStatus::censored;
      return out;
    }
    if ((pair.y1 - pair.y2).norm() > distance_threshold) {
      Eigen::VectorXd w(net.dimension());
      for (int i = 0; i < w.size(); ++i) w[i] = rng.normal();
      if (!reflection_step(pair, net, cfg, w)) {
        independent_step(pair, net, cfg, rng);
        ++out.reflection_fallbacks;
      }
    } else {
      const GaussianStepKernel k1 = GaussianStepKernel::one_step(net, cfg, pair.y1);
      const GaussianStepKernel k2 = GaussianStepKernel::one_step(net, cfg, pair.y2);
      if (k1.min_sigma <= kSingularFloor || k2.min_sigma <= kSingularFloor) {
        independent_step(pair, net, cfg, rng);
        ++out.reflection_fallbacks;
        continue;
      }
      const MaximalCouplingResult res = maximal_coupling_step(
          [&](const Eigen::VectorXd& z) { return k1.log_density(z); },
          [&](RngStream& r) { return k1.sample(r); },
          [&](const Eigen::VectorXd& z) { return k2.log_density(z); },
          [&](RngStream& r) { return k2.sample(r); }, rng);
      pair.y1 = res.z1;
      pair.y2 = res.z2;
      ++pair.t;
      if (res.coupled) pair.coupled = true;
    }
  }
}

std::vector<CouplingOutcome> collect_coupling_times(const ReactionNetwork& net,
                                                    const SimConfig& cfg, std::int64_t m_runs,
                                                    double distance_threshold,
                                                    std::int64_t max_steps,
                                                    const OccupationReservoir& start_pool,
                                                    std::uint64_t master_seed) {
  if (m_runs < 1) throw ConfigError("collect_coupling_times: need at least one run");
  if (start_pool.empty()) throw ConfigError("collect_coupling_times: empty start pool");

  std::vector<CouplingOutcome> outcomes(static_cast<std::size_t>(m_runs));
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(std::min<std::int64_t>(m_runs, 64))));
  std::atomic<std::int64_t> cursor{0};
  auto work = [&]() {
    for (;;) {
      const std::int64_t m = cursor.fetch_add(1);
      if (m >= m_runs) return;
      RngStream rng(master_seed, static_cast<std::uint64_t>(m));
      CoupledPair pair;
      pair.y1 = start_pool.sample(rng.uniform());
      pair.y2 = start_pool.sample(rng.uniform());
      outcomes[static_cast<std::size_t>(m)] =
          hybrid_coupling_run(net, cfg, std::move(pair), distance_threshold, max_steps, rng);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return outcomes;
}

double default_distance_threshold(const ReactionNetwork& net, const SimConfig& cfg,
                                  const StateVector& center) {
  const Eigen::VectorXd f = net.propensities(center.cwiseMax(0.0));
  double trace_rate = 0.0;
  for (int k = 0; k < net.reaction_count(); ++k)
    trace_rate += net.stoich_vector(k).squaredNorm() * f[k];
  return 2.0 * std::sqrt(cfg.step * trace_rate / cfg.volume);
}

}  // namespace qsd
