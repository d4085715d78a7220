#include "qsd/rng.hpp"

#include <cmath>

#include "qsd/numerics.hpp"

namespace qsd {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= tag * 0xD1342543DE82EF95ULL;
  h ^= splitmix64(s);
  s ^= index * 0xAF251AF3B0F025B5ULL;
  h ^= splitmix64(s);
  return h;
}

RngStream::RngStream(std::uint64_t seed) : eng_(seed) {}

RngStream::RngStream(std::uint64_t master, std::uint64_t stream_index)
    : eng_(derive_seed(master, 0x5354524dULL, stream_index)) {}

double RngStream::uniform() {
  const double u = static_cast<double>(eng_() >> 11) * 0x1p-53;
  return u > 0.0 ? u : 0x1p-53;
}

double RngStream::normal() { return normal_quantile(uniform()); }

std::int64_t RngStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) return poisson_quantile(mean, uniform());

  // Hormann (1993), "The transformed rejection method for generating Poisson
  // random variables", PTRS variant.
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    const double rhs = -mean + static_cast<double>(k) * log_mean -
                       std::lgamma(static_cast<double>(k) + 1.0);
    if (lhs <= rhs) return k;
  }
}

}  // namespace qsd
