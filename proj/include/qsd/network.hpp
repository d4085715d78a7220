#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qsd {

// State of the system in concentration units (molecule count / V).
using StateVector = Eigen::VectorXd;

enum class AbsorbKind { poisson, diffusion };

struct Reaction {
  Eigen::VectorXi consumed;  // c_k, non-negative integer molecule counts
  Eigen::VectorXi produced;  // c'_k
  double rate;               // kappa_k > 0

  Eigen::VectorXi change() const { return produced - consumed; }
};

// Immutable after construction; safe for concurrent read by simulation workers.
class ReactionNetwork {
 public:
  ReactionNetwork(std::vector<std::string> species, std::vector<Reaction> reactions);

  int dimension() const { return static_cast<int>(species_.size()); }
  int reaction_count() const { return static_cast<int>(reactions_.size()); }
  const std::vector<std::string>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }

  // Net molecule change l_k = c'_k - c_k of reaction k (0-based).
  const Eigen::VectorXd& stoich_vector(int k) const;

  // Mass-action intensities f_k(x) = kappa_k * prod_i x_i^{c_ki}.
  // Writes into `out` (resized to K); returns `out`.
  Eigen::VectorXd& propensities(const StateVector& x, Eigen::VectorXd& out) const;
  Eigen::VectorXd propensities(const StateVector& x) const;

  // Deterministic mass-action drift sum_k l_k f_k(x).
  Eigen::VectorXd drift(const StateVector& x) const;

 private:
  std::vector<std::string> species_;
  std::vector<Reaction> reactions_;
  std::vector<Eigen::VectorXd> change_;  // l_k cached as doubles
};

// True when the state has exited the open positive orthant. Poisson states
// land on the 1/V lattice and hit zero exactly; diffusion states can
// overshoot below zero within a step, which also counts as absorbed.
bool in_absorbing(const StateVector& x, AbsorbKind kind);

// Built-in networks. "sir" is the 2-species epidemic model, "oregonator" the
// 3-species BZ oscillator, "lv4" the 4-species competitive Lotka-Volterra
// system (17 reactions; zero competition coefficients drop their reactions).
ReactionNetwork preset(const std::string& name);

// Config text format:
//   species = ["S", "I"]
//   [[reaction]]
//   consumed = [1, 0]
//   produced = [0, 0]
//   rate = 1.0
// Unknown keys are rejected; diagnostics carry line numbers.
ReactionNetwork load_network(const std::string& config_text);
std::string serialize_network(const ReactionNetwork& net);

}  // namespace qsd
