#pragma once

#include <cstdint>

// Scalar distribution functions used across the simulators. All of them are
// deterministic, self-contained double-precision routines; no global state.

namespace qsd {

// Standard normal CDF.
double normal_cdf(double z);

// Standard normal quantile, Wichura's algorithm AS 241 (PPND16).
// Accurate to ~1e-16 for p in (0,1); p=0.5 returns exactly 0.
double normal_quantile(double p);

// Regularized incomplete gamma P(a,x) (lower) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Poisson(lambda): P(X <= k), pmf, and quantile (smallest k with cdf >= u).
double poisson_cdf(std::int64_t k, double lambda);
double poisson_log_pmf(std::int64_t k, double lambda);
std::int64_t poisson_quantile(double lambda, double u);

// Binomial(n, 1/2): P(X <= k) and quantile. Only the symmetric case is
// needed (dyadic splitting of Poisson counts).
double binomial_half_cdf(std::int64_t k, std::int64_t n);
std::int64_t binomial_half_quantile(std::int64_t n, double u);

}  // namespace qsd
