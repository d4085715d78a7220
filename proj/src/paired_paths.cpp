#include "qsd/paired_paths.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "qsd/errors.hpp"
#include "qsd/numerics.hpp"
#include "qsd/rng.hpp"

namespace qsd {

CellIncrements cell_increments_from_uniform(double u, double delta) {
  if (!(delta > 0.0)) throw StructuralError("cell_increments_from_uniform: delta <= 0");
  return {poisson_quantile(delta, u), std::sqrt(delta) * normal_quantile(u)};
}

namespace {

void generate_cellwise(PairedSkeleton& skel, RngStream& rng) {
  const auto L = skel.length;
  std::int64_t cp = 0;
  double cw = 0.0;
  for (std::int64_t i = 0; i < L; ++i) {
    const CellIncrements inc = cell_increments_from_uniform(rng.uniform(), skel.delta);
    cp += inc.poisson;
    cw += inc.wiener;
    skel.cum_poisson[static_cast<std::size_t>(i) + 1] = cp;
    skel.cum_wiener[static_cast<std::size_t>(i) + 1] = cw;
  }
}

// Recursive bisection: splits the count of an interval with a Binomial(N,1/2)
// quantile driven by the same uniform as the Brownian-bridge midpoint, so a
// high midpoint pairs with a left-heavy count split at every scale.
void fill_dyadic(PairedSkeleton& skel, RngStream& rng, std::int64_t i0, std::int64_t i1,
                 std::int64_t count, double b_left, double b_right) {
  if (i1 - i0 == 1) {
    // store increments; prefix sums are formed afterwards
    skel.cum_poisson[static_cast<std::size_t>(i1)] = count;
    skel.cum_wiener[static_cast<std::size_t>(i1)] = b_right;
    return;
  }
  const std::int64_t mid = i0 + (i1 - i0) / 2;
  const double u = rng.uniform();
  const double half_len = skel.delta * static_cast<double>(mid - i0);
  const double b_mid =
      0.5 * (b_left + b_right) + std::sqrt(0.5 * half_len) * normal_quantile(u);
  std::int64_t n_left;
  if (count == 0) {
    n_left = 0;
  } else if (count == 1) {
    n_left = (u <= 0.5) ? 0 : 1;
  } else {
    n_left = binomial_half_quantile(count, u);
  }
  fill_dyadic(skel, rng, i0, mid, n_left, b_left, b_mid);
  fill_dyadic(skel, rng, mid, i1, count - n_left, b_mid, b_right);
}

void generate_dyadic(PairedSkeleton& skel, RngStream& rng) {
  std::int64_t padded = 1;
  while (padded < skel.length) padded *= 2;
  const double horizon = skel.delta * static_cast<double>(padded);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(padded) + 1, 0);
  std::vector<double> bridge(static_cast<std::size_t>(padded) + 1, 0.0);
  std::swap(skel.cum_poisson, counts);
  std::swap(skel.cum_wiener, bridge);

  const double u0 = rng.uniform();
  const std::int64_t total = poisson_quantile(horizon, u0);
  const double b_total = std::sqrt(horizon) * normal_quantile(u0);
  fill_dyadic(skel, rng, 0, padded, total, 0.0, b_total);

  // increments -> prefix sums, then drop padding
  skel.cum_poisson[0] = 0;
  for (std::int64_t i = 1; i <= padded; ++i)
    skel.cum_poisson[static_cast<std::size_t>(i)] += skel.cum_poisson[static_cast<std::size_t>(i) - 1];
  skel.cum_poisson.resize(static_cast<std::size_t>(skel.length) + 1);
  skel.cum_wiener.resize(static_cast<std::size_t>(skel.length) + 1);
  skel.cum_wiener[0] = 0.0;
}

}  // namespace

PairedSkeleton generate_paired_skeleton(double delta, std::int64_t length, std::uint64_t seed,
                                        SkeletonScheme scheme) {
  if (!(delta > 0.0)) throw ConfigError("generate_paired_skeleton: delta must be positive");
  if (length < 1) throw ConfigError("generate_paired_skeleton: length must be >= 1");
  PairedSkeleton skel;
  skel.delta = delta;
  skel.length = length;
  skel.seed = seed;
  skel.scheme = scheme;
  skel.cum_poisson.assign(static_cast<std::size_t>(length) + 1, 0);
  skel.cum_wiener.assign(static_cast<std::size_t>(length) + 1, 0.0);
  RngStream rng(seed);
  if (scheme == SkeletonScheme::cellwise) {
    generate_cellwise(skel, rng);
  } else {
    generate_dyadic(skel, rng);
  }
  return skel;
}

double path_value(const PairedSkeleton& skel, PathKind kind, double s) {
  if (s < 0.0) throw StructuralError("path_value: negative internal time");
  const double horizon = skel.horizon();
  if (s > horizon) {
    throw HorizonExceeded("path_value: internal time " + std::to_string(s) +
                              " beyond skeleton horizon " + std::to_string(horizon) +
                              "; regenerate with length >= " +
                              std::to_string(static_cast<std::int64_t>(std::ceil(s / skel.delta))),
                          s);
  }
  auto idx = (s == horizon) ? skel.length : static_cast<std::int64_t>(s / skel.delta);
  if (idx > skel.length) idx = skel.length;
  return kind == PathKind::poisson
             ? static_cast<double>(skel.cum_poisson[static_cast<std::size_t>(idx)])
             : skel.cum_wiener[static_cast<std::size_t>(idx)];
}

KmtGammaEstimate empirical_kmt_gamma(const PairedSkeleton& skel) {
  if (skel.length < 1) throw StructuralError("empirical_kmt_gamma: empty skeleton");
  KmtGammaEstimate est;
  for (std::int64_t i = 1; i <= skel.length; ++i) {
    const double s = skel.delta * static_cast<double>(i);
    const double dev = std::fabs(static_cast<double>(skel.cum_poisson[static_cast<std::size_t>(i)]) -
                                 s - skel.cum_wiener[static_cast<std::size_t>(i)]);
    const double ratio = dev / std::log(std::max(s, 2.0));
    if (ratio > est.gamma_hat) {
      est.gamma_hat = ratio;
      est.argmax_time = s;
    }
  }
  return est;
}

SkeletonSet generate_skeleton_set(double delta, std::int64_t length, std::uint64_t master_seed,
                                  int channel_count, SkeletonScheme scheme) {
  if (channel_count < 1) throw ConfigError("generate_skeleton_set: need at least one channel");
  SkeletonSet set;
  set.channels.reserve(static_cast<std::size_t>(channel_count));
  for (int k = 0; k < channel_count; ++k) {
    PairedSkeleton skel = generate_paired_skeleton(
        delta, length, master_seed ^ static_cast<std::uint64_t>(k), scheme);
    skel.channel = k;
    set.channels.push_back(std::move(skel));
  }
  return set;
}

namespace {

constexpr char kMagic[4] = {'Q', 'S', 'K', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_skeleton(const PairedSkeleton& skel, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("save_skeleton: cannot open '" + path + "'");
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, skel.scheme);
  write_pod(out, skel.channel);
  write_pod(out, skel.delta);
  write_pod(out, skel.length);
  write_pod(out, skel.seed);
  out.write(reinterpret_cast<const char*>(skel.cum_poisson.data()),
            static_cast<std::streamsize>(skel.cum_poisson.size() * sizeof(std::int64_t)));
  out.write(reinterpret_cast<const char*>(skel.cum_wiener.data()),
            static_cast<std::streamsize>(skel.cum_wiener.size() * sizeof(double)));
  if (!out) throw ConfigError("save_skeleton: write failed for '" + path + "'");
}

PairedSkeleton load_skeleton(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_skeleton: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("load_skeleton: '" + path + "' is not a skeleton cache");
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kVersion)
    throw ConfigError("load_skeleton: unsupported cache version " + std::to_string(version));
  PairedSkeleton skel;
  read_pod(in, skel.scheme);
  read_pod(in, skel.channel);
  read_pod(in, skel.delta);
  read_pod(in, skel.length);
  read_pod(in, skel.seed);
  if (!in || skel.length < 1) throw ConfigError("load_skeleton: corrupt header");
  skel.cum_poisson.resize(static_cast<std::size_t>(skel.length) + 1);
  skel.cum_wiener.resize(static_cast<std::size_t>(skel.length) + 1);
  in.read(reinterpret_cast<char*>(skel.cum_poisson.data()),
          static_cast<std::streamsize>(skel.cum_poisson.size() * sizeof(std::int64_t)));
  in.read(reinterpret_cast<char*>(skel.cum_wiener.data()),
          static_cast<std::streamsize>(skel.cum_wiener.size() * sizeof(double)));
  if (!in) throw ConfigError("load_skeleton: truncated cache");
  return skel;
}

}  // namespace qsd
