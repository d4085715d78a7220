#include "qsd/network.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "qsd/errors.hpp"

namespace qsd {

ReactionNetwork::ReactionNetwork(std::vector<std::string> species,
                                 std::vector<Reaction> reactions)
    : species_(std::move(species)), reactions_(std::move(reactions)) {
  const int d = static_cast<int>(species_.size());
  if (d < 1) throw ConfigError("network needs at least one species");
  if (reactions_.empty()) throw ConfigError("network needs at least one reaction");
  change_.reserve(reactions_.size());
  int k = 0;
  for (const auto& r : reactions_) {
    if (r.consumed.size() != d || r.produced.size() != d)
      throw ConfigError("reaction " + std::to_string(k + 1) +
                        ": stoichiometry length differs from species count");
    if ((r.consumed.array() < 0).any() || (r.produced.array() < 0).any())
      throw ConfigError("reaction " + std::to_string(k + 1) +
                        ": negative stoichiometric coefficient");
    if (!(r.rate > 0.0))
      throw ConfigError("reaction " + std::to_string(k + 1) + ": rate must be positive");
    const Eigen::VectorXi l = r.change();
    if (l.isZero())
      throw ConfigError("reaction " + std::to_string(k + 1) +
                        ": consumed equals produced (no-op reaction)");
    change_.push_back(l.cast<double>());
    ++k;
  }
}

const Eigen::VectorXd& ReactionNetwork::stoich_vector(int k) const {
  if (k < 0 || k >= reaction_count())
    throw StructuralError("stoich_vector: reaction index out of range");
  return change_[static_cast<std::size_t>(k)];
}

Eigen::VectorXd& ReactionNetwork::propensities(const StateVector& x,
                                               Eigen::VectorXd& out) const {
  if (x.size() != dimension())
    throw StructuralError("propensities: state length differs from species count");
  const int K = reaction_count();
  out.resize(K);
  for (int k = 0; k < K; ++k) {
    const Reaction& r = reactions_[static_cast<std::size_t>(k)];
    double f = r.rate;
    for (int i = 0; i < x.size() && f != 0.0; ++i) {
      for (int c = 0; c < r.consumed[i]; ++c) f *= x[i];
    }
    out[k] = f;
  }
  return out;
}

Eigen::VectorXd ReactionNetwork::propensities(const StateVector& x) const {
  Eigen::VectorXd out;
  propensities(x, out);
  return out;
}

Eigen::VectorXd ReactionNetwork::drift(const StateVector& x) const {
  Eigen::VectorXd f = propensities(x);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension());
  for (int k = 0; k < reaction_count(); ++k) v += change_[static_cast<std::size_t>(k)] * f[k];
  return v;
}

bool in_absorbing(const StateVector& x, AbsorbKind /*kind*/) {
  // Same closure for both kinds: any coordinate <= 0.
  return (x.array() <= 0.0).any();
}

namespace {

Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<int>(v.size()));
  int i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

ReactionNetwork make_sir() {
  // 0 -> S, S+I -> 2I, S -> 0, I -> 0 with alpha=7, beta=3, mu=1, rho=1, gamma=2.
  std::vector<Reaction> rs;
  rs.push_back({ivec({0, 0}), ivec({1, 0}), 7.0});
  rs.push_back({ivec({1, 1}), ivec({0, 2}), 3.0});
  rs.push_back({ivec({1, 0}), ivec({0, 0}), 1.0});
  rs.push_back({ivec({0, 1}), ivec({0, 0}), 4.0});
  return ReactionNetwork({"S", "I"}, std::move(rs));
}

ReactionNetwork make_oregonator() {
  // S2 -> S1, S1+S2 -> 0, S1 -> 2S1+2S3, 2S1 -> 0, S3 -> S2, S3 -> 0
  // with C1=2560, C2=800000, C3=16000, C4=2000, C5=9000, delta=0.4.
  const double c5 = 9000.0, delta = 0.4;
  std::vector<Reaction> rs;
  rs.push_back({ivec({0, 1, 0}), ivec({1, 0, 0}), 2560.0});
  rs.push_back({ivec({1, 1, 0}), ivec({0, 0, 0}), 800000.0});
  rs.push_back({ivec({1, 0, 0}), ivec({2, 0, 2}), 16000.0});
  rs.push_back({ivec({2, 0, 0}), ivec({0, 0, 0}), 2000.0});
  rs.push_back({ivec({0, 0, 1}), ivec({0, 1, 0}), c5 * delta});
  rs.push_back({ivec({0, 0, 1}), ivec({0, 0, 0}), c5 * (1.0 - delta)});
  return ReactionNetwork({"S1", "S2", "S3"}, std::move(rs));
}

ReactionNetwork make_lv4() {
  // Growth S_i -> 2S_i at rate r_i, competition S_j + S_i -> S_j at rate
  // a_ij r_i (j = i gives 2S_i -> S_i). Canonical ordering: species i = 1..4,
  // growth first, then j = 1..4 ascending; zero a_ij entries (a14, a21, a32)
  // contribute no reaction, leaving 17 in total.
  const double r[4] = {1.0, 0.72, 1.53, 1.27};
  const double a[4][4] = {{1.0, 1.09, 1.52, 0.0},
                          {0.0, 1.0, 0.44, 1.36},
                          {2.33, 0.0, 1.0, 0.47},
                          {1.21, 0.51, 0.35, 1.0}};
  std::vector<Reaction> rs;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXi c = Eigen::VectorXi::Zero(4), p = Eigen::VectorXi::Zero(4);
    c[i] = 1;
    p[i] = 2;
    rs.push_back({c, p, r[i]});
    for (int j = 0; j < 4; ++j) {
      if (a[i][j] == 0.0) continue;
      Eigen::VectorXi cc = Eigen::VectorXi::Zero(4), pp = Eigen::VectorXi::Zero(4);
      cc[i] += 1;
      cc[j] += 1;
      pp[j] = 1;
      rs.push_back({cc, pp, a[i][j] * r[i]});
    }
  }
  return ReactionNetwork({"S1", "S2", "S3", "S4"}, std::move(rs));
}

}  // namespace

ReactionNetwork preset(const std::string& name) {
  if (name == "sir") return make_sir();
  if (name == "oregonator") return make_oregonator();
  if (name == "lv4") return make_lv4();
  throw ConfigError("unknown preset '" + name + "' (expected sir, oregonator, or lv4)");
}

namespace {

struct Line {
  int number;
  std::string text;
};

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parses `[a, b, c]` of integers.
Eigen::VectorXi parse_int_list(const std::string& v, int line) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    parse_fail(line, "expected a bracketed list");
  std::vector<int> vals;
  std::string body = v.substr(1, v.size() - 2);
  std::stringstream ss(body);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) parse_fail(line, "empty list entry");
    std::size_t pos = 0;
    int x = 0;
    try {
      x = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      parse_fail(line, "'" + tok + "' is not an integer");
    }
    if (pos != tok.size()) parse_fail(line, "'" + tok + "' is not an integer");
    vals.push_back(x);
  }
  if (vals.empty()) parse_fail(line, "empty list");
  Eigen::VectorXi out(static_cast<int>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) out[static_cast<int>(i)] = vals[i];
  return out;
}

std::vector<std::string> parse_string_list(const std::string& v, int line) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    parse_fail(line, "expected a bracketed list");
  std::vector<std::string> vals;
  std::string body = v.substr(1, v.size() - 2);
  std::stringstream ss(body);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.size() < 2 || tok.front() != '"' || tok.back() != '"')
      parse_fail(line, "species names must be double-quoted");
    std::string name = tok.substr(1, tok.size() - 2);
    if (name.empty()) parse_fail(line, "empty species name");
    vals.push_back(name);
  }
  if (vals.empty()) parse_fail(line, "empty species list");
  return vals;
}

double parse_real(const std::string& v, int line) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    parse_fail(line, "'" + v + "' is not a number");
  }
  if (pos != v.size()) parse_fail(line, "'" + v + "' is not a number");
  return x;
}

}  // namespace

ReactionNetwork load_network(const std::string& config_text) {
  std::vector<std::string> species;
  bool have_species = false;

  struct PendingReaction {
    Eigen::VectorXi consumed, produced;
    bool have_c = false, have_p = false, have_r = false;
    double rate = 0.0;
    int line = 0;
  };
  std::vector<PendingReaction> pending;
  PendingReaction* current = nullptr;

  std::istringstream in(config_text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[[reaction]]") {
      pending.emplace_back();
      current = &pending.back();
      current->line = lineno;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) parse_fail(lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "species") {
      if (current) parse_fail(lineno, "'species' must appear before reaction blocks");
      if (have_species) parse_fail(lineno, "duplicate 'species' key");
      species = parse_string_list(value, lineno);
      have_species = true;
    } else if (key == "consumed" || key == "produced" || key == "rate") {
      if (!current) parse_fail(lineno, "'" + key + "' outside a [[reaction]] block");
      if (key == "consumed") {
        if (current->have_c) parse_fail(lineno, "duplicate 'consumed'");
        current->consumed = parse_int_list(value, lineno);
        current->have_c = true;
      } else if (key == "produced") {
        if (current->have_p) parse_fail(lineno, "duplicate 'produced'");
        current->produced = parse_int_list(value, lineno);
        current->have_p = true;
      } else {
        if (current->have_r) parse_fail(lineno, "duplicate 'rate'");
        current->rate = parse_real(value, lineno);
        current->have_r = true;
      }
    } else {
      parse_fail(lineno, "unknown key '" + key + "'");
    }
  }

  if (!have_species) throw ParseError("missing 'species' declaration");
  if (pending.empty()) throw ParseError("no [[reaction]] blocks");
  std::vector<Reaction> rs;
  rs.reserve(pending.size());
  for (const auto& p : pending) {
    if (!p.have_c) parse_fail(p.line, "reaction block missing 'consumed'");
    if (!p.have_p) parse_fail(p.line, "reaction block missing 'produced'");
    if (!p.have_r) parse_fail(p.line, "reaction block missing 'rate'");
    rs.push_back({p.consumed, p.produced, p.rate});
  }
  try {
    return ReactionNetwork(std::move(species), std::move(rs));
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

std::string serialize_network(const ReactionNetwork& net) {
  std::ostringstream out;
  out << "species = [";
  for (int i = 0; i < net.dimension(); ++i) {
    if (i) out << ", ";
    out << '"' << net.species()[static_cast<std::size_t>(i)] << '"';
  }
  out << "]\n";
  out.precision(17);
  for (const auto& r : net.reactions()) {
    out << "\n[[reaction]]\n";
    out << "consumed = [";
    for (int i = 0; i < r.consumed.size(); ++i) out << (i ? ", " : "") << r.consumed[i];
    out << "]\nproduced = [";
    for (int i = 0; i < r.produced.size(); ++i) out << (i ? ", " : "") << r.produced[i];
    out << "]\nrate = " << r.rate << "\n";
  }
  return out.str();
}

}  // namespace qsd
