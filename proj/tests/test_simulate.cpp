#include "qsd/simulate.hpp"

#include <cmath>
#include <doctest.h>

#include "qsd/errors.hpp"
#include "qsd/numerics.hpp"
#include "test_support.hpp"

using namespace qsd;

namespace {

StateVector vec(std::initializer_list<double> v) {
  StateVector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<int>(v.size()));
  int i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

SimConfig sir_config(double volume, double step, std::int64_t t_steps, std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.volume = volume;
  cfg.step = step;
  cfg.t_steps = t_steps;
  cfg.seed = seed;
  return cfg;
}

// Flat skeletons: zero Poisson counts and zero Wiener motion.
SkeletonSet flat_skeletons(int channels, double delta, std::int64_t length) {
  SkeletonSet set;
  for (int k = 0; k < channels; ++k) {
    PairedSkeleton skel;
    skel.delta = delta;
    skel.length = length;
    skel.channel = k;
    skel.cum_poisson.assign(static_cast<std::size_t>(length) + 1, 0);
    skel.cum_wiener.assign(static_cast<std::size_t>(length) + 1, 0.0);
    set.channels.push_back(std::move(skel));
  }
  return set;
}

}  // namespace

TEST_CASE("tau leap with zero propensities freezes state and clock") {
  const ReactionNetwork net =
      ReactionNetwork({"A", "B"}, {Reaction{ivec({1, 1}), ivec({0, 1}), 1.0}});
  SimConfig cfg = sir_config(100.0, 0.01, 1);
  RngStream rng(3);
  StepSources src;
  src.rng = &rng;
  SimWorkspace ws;
  StateVector x = vec({0.0, 5.0});  // no A molecules, the only reaction is off
  ChannelClock clock(1);
  const bool absorbed = tau_leap_step(net, x, clock, cfg, src, ws);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 5.0);
  CHECK(clock.q[0] == 0.0);
  CHECK(absorbed);  // A coordinate sits on the boundary
}

TEST_CASE("tau leap applies forced skeleton increments") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(1000.0, 0.001, 1);
  cfg.mode = RandomnessMode::paired;

  // channel 0 jumps once within its first-step window q in (0, 7]; others flat
  SkeletonSet set = flat_skeletons(4, 1.0, 20);
  for (std::size_t i = 1; i < set.channels[0].cum_poisson.size(); ++i)
    set.channels[0].cum_poisson[i] = 1;

  StepSources src;
  src.skeletons = &set;
  SimWorkspace ws;
  StateVector x = vec({1.0, 1.0});
  ChannelClock clock(4);
  const bool absorbed = tau_leap_step(net, x, clock, cfg, src, ws);
  CHECK_FALSE(absorbed);
  CHECK(x[0] == doctest::Approx(1.001).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));

  // clocks accumulate V h f_k at the pre-step state
  CHECK(clock.q[0] == doctest::Approx(7.0));
  CHECK(clock.q[1] == doctest::Approx(3.0));
  CHECK(clock.q[2] == doctest::Approx(1.0));
  CHECK(clock.q[3] == doctest::Approx(4.0));
}

TEST_CASE("em step with flat noise is the Euler drift step") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(1000.0, 0.001, 1);
  cfg.mode = RandomnessMode::paired;
  SkeletonSet set = flat_skeletons(4, 1.0, 20);
  StepSources src;
  src.skeletons = &set;
  SimWorkspace ws;
  StateVector y = vec({1.0, 1.0});
  ChannelClock clock(4);
  const bool absorbed = em_step(net, y, clock, cfg, src, ws);
  CHECK_FALSE(absorbed);
  CHECK(y[0] == doctest::Approx(1.003).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("diffusion matrix columns follow l_k sqrt(V h f_k)") {
  const ReactionNetwork net = preset("sir");
  const SimConfig cfg = sir_config(1000.0, 0.001, 1);
  const Eigen::MatrixXd m = diffusion_matrix(net, vec({1.0, 1.0}), cfg);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 4);
  CHECK(m(0, 1) == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
  CHECK(m(1, 1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(m(1, 0) == 0.0);

  // vanishing propensity produces a zero column
  const Eigen::MatrixXd m0 = diffusion_matrix(net, vec({0.0, 1.0}), cfg);
  CHECK(m0.col(1).norm() == 0.0);
  CHECK(m0.col(2).norm() == 0.0);
}

TEST_CASE("covariance square root") {
  CHECK(covariance_sqrt(Eigen::MatrixXd::Identity(3, 3))
            .isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));

  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
  diag(0, 0) = 4.0;
  diag(1, 1) = 9.0;
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 2);
  expect(0, 0) = 2.0;
  expect(1, 1) = 3.0;
  CHECK(covariance_sqrt(diag).isApprox(expect, 1e-14));

  RngStream rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd a(2, 2);
    a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    const Eigen::MatrixXd n = a * a.transpose();
    const Eigen::MatrixXd s = covariance_sqrt(n);
    CHECK((s * s - n).cwiseAbs().maxCoeff() < 1e-10);
    // closed form for 2x2: (N + sqrt(det N) I) / sqrt(tr N + 2 sqrt(det N))
    const double det = n.determinant();
    const double tr = n.trace();
    const Eigen::MatrixXd closed =
        (n + std::sqrt(det) * Eigen::MatrixXd::Identity(2, 2)) /
        std::sqrt(tr + 2.0 * std::sqrt(det));
    CHECK((s - closed).cwiseAbs().maxCoeff() < 1e-10);
  }

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(covariance_sqrt(asym), NumericError);
  Eigen::MatrixXd negdef = Eigen::MatrixXd::Identity(2, 2) * -1.0;
  CHECK_THROWS_AS(covariance_sqrt(negdef), NumericError);
}

TEST_CASE("rectangular and square noise forms share the one-step covariance") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(100.0, 0.01, 1, 5);
  const StateVector y0 = vec({4.0 / 3.0, 17.0 / 12.0});
  const std::size_t n = 100000;

  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(2, 2);
  {
    const Eigen::MatrixXd m = diffusion_matrix(net, y0, cfg);
    target = m * m.transpose() / (cfg.volume * cfg.volume);
  }

  for (const NoiseForm form : {NoiseForm::rectangular, NoiseForm::square}) {
    RngStream rng(11);
    StepSources src;
    src.rng = &rng;
    SimWorkspace ws;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    const StateVector drift_state = [&] {
      StateVector tmp = y0;
      ChannelClock clock(4);
      SkeletonSet flat = flat_skeletons(4, 1.0, 1000);
      SimConfig paired = cfg;
      paired.mode = RandomnessMode::paired;
      StepSources fsrc;
      fsrc.skeletons = &flat;
      SimWorkspace fws;
      em_step(net, tmp, clock, paired, fsrc, fws);
      return tmp;
    }();
    for (std::size_t i = 0; i < n; ++i) {
      StateVector y = y0;
      ChannelClock clock(4);
      em_step(net, y, clock, cfg, src, ws, form);
      const Eigen::VectorXd noise = y - drift_state;
      mean += noise;
      cov += noise * noise.transpose();
    }
    mean /= static_cast<double>(n);
    cov = cov / static_cast<double>(n) - mean * mean.transpose();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        const double se = std::sqrt((target(r, r) * target(c, c) + target(r, c) * target(r, c)) /
                                    static_cast<double>(n));
        CHECK(std::fabs(cov(r, c) - target(r, c)) < 4.0 * se);
      }
  }
}

TEST_CASE("reservoir records, thins, and samples by floor index") {
  OccupationReservoir res;
  for (int i = 0; i < 5; ++i) res.record(vec({static_cast<double>(i), 1.0}));
  CHECK(res.size() == 5);
  CHECK(res.sample(0.5)[0] == 2.0);  // floor(0.5 * 5) = 2
  CHECK(res.sample(0.999)[0] == 4.0);
  CHECK(res.sample(0.0)[0] == 0.0);

  OccupationReservoir thinned(3);
  for (int i = 0; i < 10; ++i) thinned.record(vec({static_cast<double>(i), 1.0}));
  CHECK(thinned.recorded() == 10);
  CHECK(thinned.size() == 4);  // indices 0, 3, 6, 9
  CHECK(thinned.states()[1][0] == 3.0);
}

TEST_CASE("regen sequence counters and exhaustion") {
  RngStream rng(23);
  RegenSequence seq = RegenSequence::generate(3, rng);
  CHECK(seq.size() == 3);
  const double z1 = seq.next(ProcessKind::poisson);
  const double z2 = seq.next(ProcessKind::poisson);
  CHECK(z1 != z2);
  CHECK(seq.used(ProcessKind::poisson) == 2);
  // the diffusion counter is independent and reuses the same pool
  CHECK(seq.next(ProcessKind::diffusion) == z1);
  seq.next(ProcessKind::poisson);
  CHECK_THROWS_AS(seq.next(ProcessKind::poisson), RegenExhausted);
  seq.reset_counters();
  CHECK(seq.next(ProcessKind::poisson) == z1);
}

TEST_CASE("regenerating run without absorption keeps the whole path") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(1000.0, 0.001, 1, 77);
  OccupationReservoir res;
  RngStream rng(cfg.seed);
  const RunResult result = simulate_with_regeneration(
      net, cfg, ProcessKind::poisson, 100, vec({4.0 / 3.0, 17.0 / 12.0}), res, nullptr, rng);
  CHECK(result.regen_count == 0);
  CHECK(res.size() == 101);  // the initial state is part of the occupation measure
  CHECK_FALSE(in_absorbing(result.final_state, AbsorbKind::poisson));
}

TEST_CASE("small-volume run regenerates and keeps interior states only") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(10.0, 0.001, 1, 4);
  cfg.reservoir_thinning = 20;
  OccupationReservoir res(cfg.reservoir_thinning);
  RngStream rng(cfg.seed);
  const RunResult result = simulate_with_regeneration(
      net, cfg, ProcessKind::poisson, 1000000, vec({4.0 / 3.0, 17.0 / 12.0}), res, nullptr, rng);
  CHECK(result.regen_count >= 1);
  for (const auto& s : res.states()) CHECK_FALSE(in_absorbing(s, AbsorbKind::poisson));
}

TEST_CASE("pure-birth tau-leap marginal is Poisson") {
  const ReactionNetwork net =
      ReactionNetwork({"S"}, {Reaction{ivec({0}), ivec({1}), 2.0}});
  SimConfig cfg = sir_config(5.0, 0.1, 1, 9);
  const std::int64_t steps = 20;
  const double lambda = static_cast<double>(steps) * cfg.volume * cfg.step * 2.0;  // 20

  RngStream rng(31);
  StepSources src;
  src.rng = &rng;
  SimWorkspace ws;
  const std::size_t replicas = 20000;
  std::vector<double> observed(80, 0.0), expected(80, 0.0);
  for (std::size_t rep = 0; rep < replicas; ++rep) {
    StateVector x = vec({1.0});
    ChannelClock clock(1);
    for (std::int64_t n = 0; n < steps; ++n) tau_leap_step(net, x, clock, cfg, src, ws);
    const auto count = static_cast<std::size_t>(std::llround(cfg.volume * (x[0] - 1.0)));
    if (count < observed.size()) observed[count] += 1.0;
  }
  for (std::size_t k = 0; k < expected.size(); ++k)
    expected[k] = static_cast<double>(replicas) *
                  std::exp(poisson_log_pmf(static_cast<std::int64_t>(k), lambda));
  std::size_t dof = 0;
  const double stat = testsup::chi2_statistic(observed, expected, &dof);
  CHECK(stat < testsup::chi2_quantile(0.99, static_cast<double>(dof)));
}

TEST_CASE("channel clocks never decrease") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(100.0, 0.001, 1, 13);
  RngStream rng(cfg.seed);
  StepSources src;
  src.rng = &rng;
  SimWorkspace ws;
  StateVector x = vec({1.0, 1.0});
  ChannelClock clock(4);
  Eigen::VectorXd prev = clock.q;
  for (int n = 0; n < 2000; ++n) {
    const bool absorbed = tau_leap_step(net, x, clock, cfg, src, ws);
    CHECK((clock.q.array() >= prev.array()).all());
    prev = clock.q;
    if (absorbed) x = vec({1.0, 1.0});
  }
}

TEST_CASE("horizon estimates track the deterministic clock") {
  const ReactionNetwork net = preset("sir");
  const SimConfig cfg = sir_config(100.0, 0.001, 500);
  const StateVector eq = preset_initial_state("sir");
  const Eigen::VectorXd q = estimate_channel_horizons(net, eq, cfg);
  // the birth channel is constant-rate: q = V T alpha exactly
  CHECK(q[0] == doctest::Approx(100.0 * 0.5 * 7.0).epsilon(1e-9));
  CHECK(skeleton_length_for(q, 0.01, 1.5) >=
        static_cast<std::int64_t>(1.5 * q.maxCoeff() / 0.01));
}

TEST_CASE("preset initial states sit on the attractor") {
  const StateVector sir = preset_initial_state("sir");
  CHECK(sir[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
  CHECK(sir[1] == doctest::Approx(17.0 / 12.0).epsilon(1e-6));

  const StateVector oreg = preset_initial_state("oregonator");
  CHECK((oreg.array() > 0.0).all());
  // drift should not explode away from the attractor over a short horizon
  const ReactionNetwork net = preset("oregonator");
  const StateVector later = integrate_drift(net, oreg, 1e-7, 50000);
  CHECK((later.array() > 0.0).all());

  const StateVector lv4 = preset_initial_state("lv4");
  CHECK((lv4.array() > 0.0).all());
  CHECK((lv4.array() < 3.0).all());
}

TEST_CASE("paired mode propagates horizon exhaustion with a sizing hint") {
  const ReactionNetwork net = preset("sir");
  SimConfig cfg = sir_config(1000.0, 0.001, 1);
  cfg.mode = RandomnessMode::paired;
  SkeletonSet set = flat_skeletons(4, 0.5, 2);  // horizon 1.0 internal unit, too short
  StepSources src;
  src.skeletons = &set;
  SimWorkspace ws;
  StateVector x = vec({1.0, 1.0});
  ChannelClock clock(4);
  CHECK_THROWS_AS(tau_leap_step(net, x, clock, cfg, src, ws), HorizonExceeded);
}
