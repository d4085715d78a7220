#include "qsd/qsd_estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsd/errors.hpp"

namespace qsd {

std::int64_t Mesh::total_bins() const {
  std::int64_t n = 1;
  for (int i = 0; i < dimension(); ++i) n *= bins(i);
  return n;
}

void Mesh::validate() const {
  if (edges.empty()) throw ConfigError("mesh has no dimensions");
  for (const auto& e : edges) {
    if (e.size() < 2) throw ConfigError("mesh dimension needs at least one bin");
    for (std::size_t i = 1; i < e.size(); ++i)
      if (!(e[i] > e[i - 1])) throw ConfigError("mesh edges must be strictly increasing");
  }
}

std::int64_t Mesh::locate(const StateVector& x, bool* clipped) const {
  if (x.size() != dimension()) throw StructuralError("mesh locate: dimension mismatch");
  if (clipped) *clipped = false;
  std::int64_t flat = 0;
  for (int i = 0; i < dimension(); ++i) {
    const auto& e = edges[static_cast<std::size_t>(i)];
    const std::int64_t nb = bins(i);
    std::int64_t idx;
    if (x[i] < e.front()) {
      idx = 0;
      if (clipped) *clipped = true;
    } else if (x[i] >= e.back()) {
      idx = nb - 1;
      if (clipped && x[i] > e.back()) *clipped = true;
    } else {
      idx = static_cast<std::int64_t>(std::upper_bound(e.begin(), e.end(), x[i]) - e.begin()) - 1;
    }
    flat = flat * nb + idx;
  }
  return flat;
}

StateVector Mesh::bin_center(std::int64_t flat) const {
  StateVector c(dimension());
  for (int i = dimension() - 1; i >= 0; --i) {
    const std::int64_t nb = bins(i);
    const std::int64_t idx = flat % nb;
    flat /= nb;
    const auto& e = edges[static_cast<std::size_t>(i)];
    c[i] = 0.5 * (e[static_cast<std::size_t>(idx)] + e[static_cast<std::size_t>(idx) + 1]);
  }
  return c;
}

Mesh Mesh::uniform(const StateVector& lo, const StateVector& hi,
                   const std::vector<std::int64_t>& bins_per_dim) {
  if (lo.size() != hi.size() || static_cast<std::size_t>(lo.size()) != bins_per_dim.size())
    throw ConfigError("mesh bounds/bins dimension mismatch");
  Mesh m;
  for (int i = 0; i < lo.size(); ++i) {
    const std::int64_t nb = bins_per_dim[static_cast<std::size_t>(i)];
    if (nb < 1) throw ConfigError("bins per dimension must be >= 1");
    if (!(hi[i] > lo[i])) throw ConfigError("mesh upper bound must exceed lower bound");
    std::vector<double> e(static_cast<std::size_t>(nb) + 1);
    for (std::int64_t j = 0; j <= nb; ++j)
      e[static_cast<std::size_t>(j)] =
          lo[i] + (hi[i] - lo[i]) * static_cast<double>(j) / static_cast<double>(nb);
    m.edges.push_back(std::move(e));
  }
  m.validate();
  return m;
}

HistogramAccumulator::HistogramAccumulator(Mesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  counts_.assign(static_cast<std::size_t>(mesh_.total_bins()), 0.0);
}

void HistogramAccumulator::add(const StateVector& x) {
  bool clipped = false;
  counts_[static_cast<std::size_t>(mesh_.locate(x, &clipped))] += 1.0;
  ++total_;
  if (clipped) ++clipped_;
}

void HistogramAccumulator::merge(const HistogramAccumulator& other) {
  if (!(mesh_ == other.mesh_)) throw StructuralError("histogram merge: mesh mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  clipped_ += other.clipped_;
}

HistogramMeasure HistogramAccumulator::to_measure() const {
  if (total_ == 0) throw ConfigError("histogram from empty sample");
  HistogramMeasure m;
  m.mesh = mesh_;
  m.probabilities.resize(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i)
    m.probabilities[static_cast<Eigen::Index>(i)] = counts_[i] / static_cast<double>(total_);
  m.clip_fraction = static_cast<double>(clipped_) / static_cast<double>(total_);
  m.samples = total_;
  return m;
}

HistogramMeasure histogram(const OccupationReservoir& reservoir, const Mesh& mesh) {
  if (reservoir.empty()) throw ConfigError("histogram: empty reservoir");
  HistogramAccumulator acc(mesh);
  for (const auto& x : reservoir.states()) acc.add(x);
  return acc.to_measure();
}

namespace {

// Per-dimension mapping: for each coarse bin, which fine bins subdivide it.
std::vector<std::vector<std::int64_t>> nest_map(const std::vector<double>& coarse,
                                                const std::vector<double>& fine) {
  constexpr double kTol = 1e-12;
  std::vector<std::vector<std::int64_t>> map(coarse.size() - 1);
  std::size_t fi = 0;
  if (std::fabs(fine.front() - coarse.front()) > kTol)
    throw ConfigError("refine: fine mesh does not start at the coarse boundary");
  for (std::size_t ci = 0; ci + 1 < coarse.size(); ++ci) {
    const double upper = coarse[ci + 1];
    while (fi + 1 < fine.size() && fine[fi + 1] <= upper + kTol) {
      map[ci].push_back(static_cast<std::int64_t>(fi));
      ++fi;
    }
    if (map[ci].empty() || std::fabs(fine[fi] - upper) > kTol)
      throw ConfigError("refine: fine mesh does not nest the coarse mesh");
  }
  if (fi + 1 != fine.size()) throw ConfigError("refine: fine mesh extends past the coarse mesh");
  return map;
}

}  // namespace

HistogramMeasure refine_to_common_mesh(const HistogramMeasure& coarse, const Mesh& fine) {
  fine.validate();
  if (coarse.mesh.dimension() != fine.dimension())
    throw ConfigError("refine: dimension mismatch");
  const int d = fine.dimension();
  std::vector<std::vector<std::vector<std::int64_t>>> maps;
  maps.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    maps.push_back(nest_map(coarse.mesh.edges[static_cast<std::size_t>(i)],
                            fine.edges[static_cast<std::size_t>(i)]));

  HistogramMeasure out;
  out.mesh = fine;
  out.probabilities = Eigen::VectorXd::Zero(fine.total_bins());
  out.clip_fraction = coarse.clip_fraction;
  out.samples = coarse.samples;

  // Walk coarse bins; distribute mass equally over the product of sub-bins.
  const std::int64_t coarse_total = coarse.mesh.total_bins();
  std::vector<std::int64_t> cidx(static_cast<std::size_t>(d), 0);
  for (std::int64_t flat = 0; flat < coarse_total; ++flat) {
    std::int64_t rem = flat;
    for (int i = d - 1; i >= 0; --i) {
      cidx[static_cast<std::size_t>(i)] = rem % coarse.mesh.bins(i);
      rem /= coarse.mesh.bins(i);
    }
    const double mass = coarse.probabilities[flat];
    if (mass == 0.0) continue;
    std::int64_t sub_count = 1;
    for (int i = 0; i < d; ++i)
      sub_count *= static_cast<std::int64_t>(
          maps[static_cast<std::size_t>(i)][static_cast<std::size_t>(cidx[static_cast<std::size_t>(i)])].size());
    const double share = mass / static_cast<double>(sub_count);
    // enumerate the product of fine sub-bins
    std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
    for (;;) {
      std::int64_t fflat = 0;
      for (int i = 0; i < d; ++i) {
        const auto& subs =
            maps[static_cast<std::size_t>(i)][static_cast<std::size_t>(cidx[static_cast<std::size_t>(i)])];
        fflat = fflat * fine.bins(i) + subs[pos[static_cast<std::size_t>(i)]];
      }
      out.probabilities[fflat] += share;
      int i = d - 1;
      for (; i >= 0; --i) {
        const auto& subs =
            maps[static_cast<std::size_t>(i)][static_cast<std::size_t>(cidx[static_cast<std::size_t>(i)])];
        if (++pos[static_cast<std::size_t>(i)] < subs.size()) break;
        pos[static_cast<std::size_t>(i)] = 0;
      }
      if (i < 0) break;
    }
  }
  return out;
}

double tv_distance(const HistogramMeasure& a, const HistogramMeasure& b) {
  if (!(a.mesh == b.mesh)) throw StructuralError("tv_distance: mesh mismatch");
  return 0.5 * (a.probabilities - b.probabilities).cwiseAbs().sum();
}

double solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw StructuralError("solve_assignment: matrix not square");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(match[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

double empirical_w1(const std::vector<StateVector>& samples_a,
                    const std::vector<StateVector>& samples_b) {
  if (samples_a.size() != samples_b.size())
    throw ConfigError("empirical_w1: sample counts differ");
  if (samples_a.empty()) throw ConfigError("empirical_w1: empty samples");
  if (samples_a.size() > 512)
    throw ConfigError("empirical_w1: refusing n > 512 (O(n^3) assignment)");
  const int n = static_cast<int>(samples_a.size());
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = std::min(
          1.0, (samples_a[static_cast<std::size_t>(i)] - samples_b[static_cast<std::size_t>(j)]).norm());
  return solve_assignment(cost) / static_cast<double>(n);
}

void SmallChainSpec::validate() const {
  if (q.rows() != q.cols() || q.rows() < 2)
    throw ConfigError("small chain: generator must be square, n >= 2");
  const int n = static_cast<int>(q.rows());
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i != j && q(i, j) < -1e-12)
        throw ConfigError("small chain: negative off-diagonal entry");
      row += q(i, j);
    }
    if (row > 1e-9) throw ConfigError("small chain: row sum positive (not a killed generator)");
  }
  // strong connectivity of the off-diagonal support graph, both directions
  auto reachable = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        const double w = transpose ? q(j, i) : q(i, j);
        if (i != j && w > 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  if (!reachable(false) || !reachable(true))
    throw ConfigError("small chain: generator is reducible on the transient class");
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a, double tol) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd b = a * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 60; ++k) {
    term = (term * b) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < tol) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

namespace {

// Dominant left eigenvector of a (entrywise non-negative, primitive) matrix,
// l1-normalized. Plain power iteration; the Perron vector is all we need.
Eigen::VectorXd dominant_left_eigenvector(const Eigen::MatrixXd& a, double tol,
                                          std::int64_t max_iters) {
  const Eigen::MatrixXd at = a.transpose();
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd next(n);
  for (std::int64_t it = 0; it < max_iters; ++it) {
    next.noalias() = at * w;
    const double s = next.sum();
    if (!(s > 0.0)) throw NumericError("power iteration: iterate collapsed");
    next /= s;
    const double diff = (next - w).cwiseAbs().sum();
    w = next;
    if (diff < tol) return w.cwiseMax(0.0) / w.cwiseMax(0.0).sum();
  }
  throw NumericError("power iteration: no convergence within iteration budget");
}

}  // namespace

Eigen::MatrixXd leap_transition_matrix(const SmallChainSpec& spec, double h) {
  const int n = static_cast<int>(spec.q.rows());
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || spec.q(i, j) <= 0.0) continue;
      const double p = 1.0 - std::exp(-h * spec.q(i, j));
      // distributions act from the left, so later channels multiply on the right
      Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n);
      k(i, i) = 1.0 - p;
      k(i, j) = p;
      t = t * k;
    }
  }
  // killing outflow at the rate frozen in the start state scales row i
  for (int i = 0; i < n; ++i) {
    const double kill = -spec.q.row(i).sum();
    if (kill > 0.0) t.row(i) *= std::exp(-h * kill);
  }
  return t;
}

SmallChainResult small_chain_qsd(const SmallChainSpec& spec, double h) {
  spec.validate();
  if (!(h > 0.0)) throw ConfigError("small chain: h must be positive");
  const double max_diag = spec.q.diagonal().cwiseAbs().maxCoeff();
  if (h * max_diag >= 1.0)
    throw ConfigError("small chain: h too large for the first-order regime");

  const Eigen::MatrixXd leap = leap_transition_matrix(spec, h);
  const Eigen::MatrixXd exact = matrix_exponential(h * spec.q, 1e-12);

  SmallChainResult out;
  out.pi_exact = dominant_left_eigenvector(exact, 1e-12, 100000);
  out.pi_numerical = dominant_left_eigenvector(leap, 1e-12, 100000);
  out.l1_error = (out.pi_exact - out.pi_numerical).cwiseAbs().sum();
  return out;
}

}  // namespace qsd
