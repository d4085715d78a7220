#include "qsd/qsd_estimate.hpp"

#include <algorithm>
#include <cmath>
#include <doctest.h>

#include "qsd/errors.hpp"
#include "qsd/rng.hpp"
#include "test_support.hpp"

using namespace qsd;

namespace {

StateVector vec(std::initializer_list<double> v) {
  StateVector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Mesh mesh1d(double lo, double hi, std::int64_t bins) {
  return Mesh::uniform(vec({lo}), vec({hi}), {bins});
}

}  // namespace

TEST_CASE("histogram of single and coincident states") {
  OccupationReservoir res;
  res.record(vec({0.55}));
  const Mesh mesh = mesh1d(0.0, 1.0, 10);
  HistogramMeasure h = histogram(res, mesh);
  CHECK(h.probabilities.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(h.probabilities[5] == 1.0);

  res.record(vec({0.59}));  // same bin
  h = histogram(res, mesh);
  CHECK(h.probabilities[5] == 1.0);

  OccupationReservoir empty;
  CHECK_THROWS_AS(histogram(empty, mesh), ConfigError);
}

TEST_CASE("histogram of uniform draws stays within binomial error bands") {
  RngStream rng(101);
  OccupationReservoir res;
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i) res.record(vec({rng.uniform()}));
  const HistogramMeasure h = histogram(res, mesh1d(0.0, 1.0, 10));
  const double band = 3.0 * std::sqrt(0.1 * 0.9 / static_cast<double>(n));
  for (int b = 0; b < 10; ++b) CHECK(std::fabs(h.probabilities[b] - 0.1) < band);
  CHECK(h.clip_fraction == 0.0);
}

TEST_CASE("out-of-range states clip to boundary bins and are counted") {
  OccupationReservoir res;
  res.record(vec({-5.0}));
  res.record(vec({0.5}));
  res.record(vec({27.0}));
  const HistogramMeasure h = histogram(res, mesh1d(0.0, 1.0, 4));
  CHECK(h.probabilities[0] == doctest::Approx(1.0 / 3.0));
  CHECK(h.probabilities[3] == doctest::Approx(1.0 / 3.0));
  CHECK(h.clip_fraction == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("refinement splits mass equally and conserves it") {
  OccupationReservoir res;
  res.record(vec({0.5, 0.5}));
  const Mesh coarse = Mesh::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), {1, 1});
  const Mesh fine = Mesh::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), {2, 2});
  const HistogramMeasure h = histogram(res, coarse);
  const HistogramMeasure refined = refine_to_common_mesh(h, fine);
  REQUIRE(refined.probabilities.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(refined.probabilities[i] == doctest::Approx(0.25));

  // identity subdivision
  const HistogramMeasure same = refine_to_common_mesh(h, coarse);
  CHECK(same.probabilities[0] == 1.0);

  // exact mass conservation on a random histogram
  RngStream rng(55);
  OccupationReservoir big;
  for (int i = 0; i < 5000; ++i) big.record(vec({rng.uniform(), rng.uniform()}));
  const Mesh c5 = Mesh::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), {5, 5});
  const Mesh f15 = Mesh::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), {15, 15});
  const HistogramMeasure hb = histogram(big, c5);
  const HistogramMeasure hr = refine_to_common_mesh(hb, f15);
  CHECK(std::fabs(hr.probabilities.sum() - 1.0) < 1e-15);

  const Mesh bad = Mesh::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), {7, 7});
  CHECK_THROWS_AS(refine_to_common_mesh(hb, bad), ConfigError);
}

TEST_CASE("tv distance is a metric on a fixed mesh") {
  const Mesh mesh = mesh1d(0.0, 1.0, 8);
  RngStream rng(7);
  const auto random_hist = [&]() {
    OccupationReservoir res;
    for (int i = 0; i < 200; ++i) res.record(vec({rng.uniform()}));
    return histogram(res, mesh);
  };
  const HistogramMeasure a = random_hist(), b = random_hist(), c = random_hist();
  CHECK(tv_distance(a, a) == 0.0);
  CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)));
  CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15);
  CHECK(tv_distance(a, b) >= 0.0);
  CHECK(tv_distance(a, b) <= 1.0);

  // disjoint supports
  OccupationReservoir left, right;
  left.record(vec({0.1}));
  right.record(vec({0.9}));
  CHECK(tv_distance(histogram(left, mesh), histogram(right, mesh)) == 1.0);

  const HistogramMeasure other = histogram(left, mesh1d(0.0, 2.0, 8));
  CHECK_THROWS_AS(tv_distance(a, other), StructuralError);
}

TEST_CASE("empirical w1 basics and the capped metric") {
  std::vector<StateVector> a{vec({1.0}), vec({2.0})};
  CHECK(empirical_w1(a, a) == 0.0);

  std::vector<StateVector> p{vec({0.0})}, q{vec({3.0})};
  CHECK(empirical_w1(p, q) == 1.0);  // min(1, 3)

  // constant shift below the cap moves each sample by the shift, provided no
  // capped wrap-around matching undercuts the sorted one (well-spread samples)
  RngStream rng(3);
  std::vector<StateVector> base, shifted;
  for (int i = 0; i < 8; ++i) {
    const double x = 0.05 + 0.1 * i + 0.04 * (rng.uniform() - 0.5);
    base.push_back(vec({x}));
    shifted.push_back(vec({x + 0.1}));
  }
  const double w1 = empirical_w1(base, shifted);
  CHECK(w1 == doctest::Approx(0.1).epsilon(1e-12));
  // brute-force oracle over all assignments
  {
    Eigen::MatrixXd cost(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        cost(i, j) = std::min(1.0, std::fabs(base[static_cast<std::size_t>(i)][0] -
                                             shifted[static_cast<std::size_t>(j)][0]));
    std::vector<int> perm{0, 1, 2, 3, 4, 5, 6, 7};
    double best = 1e300;
    do {
      double total = 0.0;
      for (int i = 0; i < 8; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(w1 == doctest::Approx(best / 8.0).epsilon(1e-12));
  }

  std::vector<StateVector> too_many(513, vec({0.0}));
  CHECK_THROWS_AS(empirical_w1(too_many, too_many), ConfigError);
  std::vector<StateVector> mismatch(5, vec({0.0}));
  CHECK_THROWS_AS(empirical_w1(mismatch, p), ConfigError);
}

TEST_CASE("assignment solver agrees with brute force on small instances") {
  RngStream rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5.0);
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform();

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    double best = 1e300;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));

    CHECK(solve_assignment(cost) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("empirical w1 between draws of one law decays with sample size") {
  RngStream rng(83);
  std::vector<double> medians;
  for (const int n : {32, 128, 512}) {
    std::vector<double> values;
    for (int rep = 0; rep < 7; ++rep) {
      std::vector<StateVector> a, b;
      for (int i = 0; i < n; ++i) {
        a.push_back(vec({rng.normal()}));
        b.push_back(vec({rng.normal()}));
      }
      values.push_back(empirical_w1(a, b));
    }
    medians.push_back(testsup::median(values));
  }
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}

namespace {

// 6-state birth-death generator killed at the lowest state.
Eigen::MatrixXd killed_birth_death() {
  const int n = 6;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double birth = 1.0 + 0.3 * i;
    const double death = 0.7 + 0.2 * i;
    if (i + 1 < n) q(i, i + 1) = birth;
    if (i > 0) q(i, i - 1) = death;
    double out = (i + 1 < n ? birth : 0.0) + (i > 0 ? death : 0.0);
    if (i == 0) out += 0.5;  // absorption outflow
    q(i, i) = -out;
  }
  return q;
}

}  // namespace

TEST_CASE("small chain oracle converges at first order") {
  SmallChainSpec spec{killed_birth_death()};
  const SmallChainResult full = small_chain_qsd(spec, 1e-3);
  const SmallChainResult half = small_chain_qsd(spec, 5e-4);
  const double ratio = full.l1_error / half.l1_error;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("small chain oracle sees symmetric stationary cases") {
  // symmetric proper generator: the exact QSD is uniform; the leap kernel
  // deviates only at second order in h
  const int n = 5;
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(n, n, 0.4);
  for (int i = 0; i < n; ++i) q(i, i) = -0.4 * (n - 1);
  const double h = 1e-2;
  const SmallChainResult res = small_chain_qsd(SmallChainSpec{q}, h);
  for (int i = 0; i < n; ++i)
    CHECK(res.pi_exact[i] == doctest::Approx(1.0 / n).epsilon(1e-10));
  CHECK(res.l1_error < 2.0 * h);
  const SmallChainResult finer = small_chain_qsd(SmallChainSpec{q}, h / 2.0);
  const double ratio = res.l1_error / finer.l1_error;
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("small chain outputs are normalized distributions") {
  SmallChainSpec spec{killed_birth_death()};
  const SmallChainResult res = small_chain_qsd(spec, 2e-3);
  CHECK((res.pi_exact.array() >= 0.0).all());
  CHECK((res.pi_numerical.array() >= 0.0).all());
  CHECK(std::fabs(res.pi_exact.sum() - 1.0) < 1e-12);
  CHECK(std::fabs(res.pi_numerical.sum() - 1.0) < 1e-12);
}

TEST_CASE("leap kernel is substochastic and first-order consistent") {
  SmallChainSpec spec{killed_birth_death()};
  const double h = 1e-3;
  const Eigen::MatrixXd t = leap_transition_matrix(spec, h);
  CHECK((t.array() >= 0.0).all());
  for (int i = 0; i < t.rows(); ++i) CHECK(t.row(i).sum() <= 1.0 + 1e-12);
  const Eigen::MatrixXd euler =
      Eigen::MatrixXd::Identity(t.rows(), t.cols()) + h * spec.q;
  CHECK((t - euler).cwiseAbs().maxCoeff() < 20.0 * h * h);
}

TEST_CASE("small chain validation rejects bad generators") {
  Eigen::MatrixXd reducible = Eigen::MatrixXd::Zero(3, 3);
  reducible(0, 1) = 1.0;
  reducible(0, 0) = -1.0;
  reducible(1, 0) = 1.0;
  reducible(1, 1) = -1.0;
  reducible(2, 2) = -0.5;  // state 2 unreachable
  CHECK_THROWS_AS(small_chain_qsd(SmallChainSpec{reducible}, 1e-3), ConfigError);

  Eigen::MatrixXd negative = killed_birth_death();
  negative(0, 1) = -2.0;
  CHECK_THROWS_AS(small_chain_qsd(SmallChainSpec{negative}, 1e-3), ConfigError);

  CHECK_THROWS_AS(small_chain_qsd(SmallChainSpec{killed_birth_death()}, 1.0), ConfigError);
}

TEST_CASE("matrix exponential on closed-form cases") {
  Eigen::MatrixXd nilpotent = Eigen::MatrixXd::Zero(2, 2);
  nilpotent(0, 1) = 1.0;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(2, 2);
  expected(0, 1) = 1.0;
  CHECK(matrix_exponential(nilpotent).isApprox(expected, 1e-13));

  Eigen::MatrixXd rot = Eigen::MatrixXd::Zero(2, 2);
  const double theta = 0.7;
  rot(0, 1) = -theta;
  rot(1, 0) = theta;
  Eigen::MatrixXd rot_expected(2, 2);
  rot_expected << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  CHECK(matrix_exponential(rot).isApprox(rot_expected, 1e-12));

  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2, 2);
  big(0, 0) = -30.0;
  big(1, 1) = 4.0;
  const Eigen::MatrixXd e = matrix_exponential(big);
  CHECK(e(0, 0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-10));
  CHECK(e(1, 1) == doctest::Approx(std::exp(4.0)).epsilon(1e-10));
}
