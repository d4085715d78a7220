#include "qsd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsd/errors.hpp"

namespace qsd {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

// Wichura, M.J. (1988), "Algorithm AS 241: The Percentage Points of the
// Normal Distribution", Applied Statistics 37, 477-484. PPND16 variant.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw StructuralError("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

namespace {

constexpr double kEps = 3.0e-16;
constexpr double kFpMin = 1.0e-300;

double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double del = sum;
  double ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_contfrac(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw StructuralError("gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw StructuralError("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw StructuralError("incomplete_beta: invalid arguments");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_contfrac(a, b, x) / a;
  return 1.0 - bt * beta_contfrac(b, a, 1.0 - x) / b;
}

double poisson_cdf(std::int64_t k, double lambda) {
  if (k < 0) return 0.0;
  // P(X <= k) = Q(k+1, lambda)
  return gamma_q(static_cast<double>(k) + 1.0, lambda);
}

double poisson_log_pmf(std::int64_t k, double lambda) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  const double kd = static_cast<double>(k);
  return -lambda + kd * std::log(lambda) - std::lgamma(kd + 1.0);
}

std::int64_t poisson_quantile(double lambda, double u) {
  if (lambda < 0.0) throw StructuralError("poisson_quantile: negative mean");
  if (lambda == 0.0) return 0;
  if (u <= 0.0) return 0;

  if (lambda <= 30.0) {
    double pmf = std::exp(-lambda);
    double cdf = pmf;
    std::int64_t k = 0;
    while (cdf < u) {
      ++k;
      pmf *= lambda / static_cast<double>(k);
      cdf += pmf;
      // u may exceed the representable cdf mass; stop once the tail is dust
      if (pmf < 1e-18 && static_cast<double>(k) > lambda) break;
    }
    return k;
  }

  // Cornish-Fisher start, then local refinement against the exact cdf.
  const double z = normal_quantile(std::min(std::max(u, 1e-300), 1.0 - 1e-16));
  const double s = std::sqrt(lambda);
  std::int64_t k = static_cast<std::int64_t>(
      std::floor(lambda + s * z + (z * z - 1.0) / 6.0 + 0.5));
  if (k < 0) k = 0;
  double cdf = poisson_cdf(k, lambda);
  if (cdf >= u) {
    while (k > 0) {
      const double pmf = std::exp(poisson_log_pmf(k, lambda));
      if (cdf - pmf < u) break;
      cdf -= pmf;
      --k;
    }
    return k;
  }
  for (;;) {
    ++k;
    cdf += std::exp(poisson_log_pmf(k, lambda));
    if (cdf >= u || cdf >= 1.0 - 1e-16) return k;
  }
}

double binomial_half_cdf(std::int64_t k, std::int64_t n) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  // P(X <= k) = I_{1/2}(n-k, k+1)
  return incomplete_beta(static_cast<double>(n - k), static_cast<double>(k) + 1.0, 0.5);
}

std::int64_t binomial_half_quantile(std::int64_t n, double u) {
  if (n < 0) throw StructuralError("binomial_half_quantile: negative n");
  if (n == 0) return 0;
  if (u <= 0.0) return 0;

  if (n <= 64) {
    double pmf = std::ldexp(1.0, static_cast<int>(-n));
    double cdf = pmf;
    std::int64_t k = 0;
    while (cdf < u && k < n) {
      pmf *= static_cast<double>(n - k) / static_cast<double>(k + 1);
      ++k;
      cdf += pmf;
    }
    return k;
  }

  const double nd = static_cast<double>(n);
  const double z = normal_quantile(std::min(std::max(u, 1e-300), 1.0 - 1e-16));
  std::int64_t k = static_cast<std::int64_t>(std::floor(0.5 * nd + 0.5 * std::sqrt(nd) * z + 0.5));
  k = std::clamp<std::int64_t>(k, 0, n);
  const double log2n = nd * 0.6931471805599453094;
  auto log_pmf = [&](std::int64_t j) {
    return std::lgamma(nd + 1.0) - std::lgamma(static_cast<double>(j) + 1.0) -
           std::lgamma(static_cast<double>(n - j) + 1.0) - log2n;
  };
  double cdf = binomial_half_cdf(k, n);
  if (cdf >= u) {
    while (k > 0) {
      const double pmf = std::exp(log_pmf(k));
      if (cdf - pmf < u) break;
      cdf -= pmf;
      --k;
    }
    return k;
  }
  while (k < n) {
    ++k;
    cdf += std::exp(log_pmf(k));
    if (cdf >= u || cdf >= 1.0 - 1e-16) return k;
  }
  return n;
}

}  // namespace qsd
