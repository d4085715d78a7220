#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qsd/network.hpp"
#include "qsd/simulate.hpp"

namespace qsd {

// Rectangular mesh: per-dimension strictly increasing bin edges.
struct Mesh {
  std::vector<std::vector<double>> edges;

  int dimension() const { return static_cast<int>(edges.size()); }
  std::int64_t bins(int dim) const { return static_cast<std::int64_t>(edges[static_cast<std::size_t>(dim)].size()) - 1; }
  std::int64_t total_bins() const;
  bool operator==(const Mesh& other) const { return edges == other.edges; }

  // Flat row-major bin index; out-of-range coordinates clip to boundary bins.
  std::int64_t locate(const StateVector& x, bool* clipped = nullptr) const;
  StateVector bin_center(std::int64_t flat) const;

  static Mesh uniform(const StateVector& lo, const StateVector& hi,
                      const std::vector<std::int64_t>& bins_per_dim);
  void validate() const;
};

struct HistogramMeasure {
  Mesh mesh;
  Eigen::VectorXd probabilities;  // flattened row-major, sums to 1
  double clip_fraction = 0.0;
  std::int64_t samples = 0;
};

// Streaming bin counter; merging partial accumulators is associative.
class HistogramAccumulator {
 public:
  explicit HistogramAccumulator(Mesh mesh);
  void add(const StateVector& x);
  void merge(const HistogramAccumulator& other);
  HistogramMeasure to_measure() const;
  std::int64_t samples() const { return total_; }

 private:
  Mesh mesh_;
  std::vector<double> counts_;
  std::int64_t total_ = 0;
  std::int64_t clipped_ = 0;
};

// Normalized bin histogram of a reservoir.
HistogramMeasure histogram(const OccupationReservoir& reservoir, const Mesh& mesh);

// Spreads each coarse bin's mass equally over its fine sub-bins. The fine
// mesh must nest the coarse one (every coarse edge present).
HistogramMeasure refine_to_common_mesh(const HistogramMeasure& coarse, const Mesh& fine);

// (1/2) sum |a_i - b_i| on a common mesh.
double tv_distance(const HistogramMeasure& a, const HistogramMeasure& b);

// Exact 1-Wasserstein between two equal-size empirical measures under
// d(x,y) = min(1, |x-y|), by optimal assignment. Refuses n > 512.
double empirical_w1(const std::vector<StateVector>& samples_a,
                    const std::vector<StateVector>& samples_b);

// Exact minimum-cost assignment value of a square cost matrix
// (Jonker-Volgenant style shortest augmenting paths).
double solve_assignment(const Eigen::MatrixXd& cost);

// Generator of a continuous-time chain restricted to its transient class:
// off-diagonals >= 0, row sums <= 0 (strictly negative rows carry the
// absorption outflow), irreducible.
struct SmallChainSpec {
  Eigen::MatrixXd q;
  void validate() const;
};

struct SmallChainResult {
  Eigen::VectorXd pi_exact;      // dominant left eigenvector of exp(hQ), l1-normalized
  Eigen::VectorXd pi_numerical;  // dominant left eigenvector of the leap kernel
  double l1_error = 0.0;
};

// One step of the frozen-rate leap scheme as a substochastic matrix: every
// transition channel (i -> j at rate q_ij) fires within the step with
// probability 1 - exp(-h q_ij), channels composed in canonical row-major
// order, followed by the killing outflow. Agrees with exp(hQ) to first order
// but does not commute with it, so the QSD error is genuinely O(h).
// (I + hQ itself is a function of Q and shares its eigenvectors exactly,
// which would make the discretization error identically zero.)
Eigen::MatrixXd leap_transition_matrix(const SmallChainSpec& spec, double h);

// Linear-algebra oracle for the first-order QSD error of the leap scheme:
// compares the dominant left eigenvectors of exp(hQ) and of the leap kernel.
SmallChainResult small_chain_qsd(const SmallChainSpec& spec, double h);

// Scaling-and-squaring series evaluation, truncated at `tol`.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a, double tol = 1e-12);

}  // namespace qsd
