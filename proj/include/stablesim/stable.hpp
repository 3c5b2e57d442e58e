#pragma once

// Symmetric alpha-stable laws: exact-scale sampling, characteristic function,
// CDF/quantile by oscillatory quadrature, and the calibrated tail and
// truncated-variance certificates used by the decomposition bounds.

#include <cstdint>
#include <span>
#include <vector>

#include "stablesim/empirical.hpp"
#include "stablesim/errors.hpp"
#include "stablesim/rng.hpp"

namespace stablesim {

// Law with characteristic function exp(-sigma^alpha |theta|^alpha).
// alpha is strictly inside (0,2); sigma is strictly positive.
struct AlphaStableParams {
  double alpha;
  double sigma;
};

AlphaStableParams make_params(double alpha, double sigma);

// Chambers-Mallows-Stuck transform. u is the angle in (-pi/2, pi/2) and e a
// positive exponential variate. sigma multiplies last, so scaling the returned
// variate by sigma2/sigma1 is bitwise exact.
double sas_from_uniform_exponential(const AlphaStableParams& p, double u, double e);

// One keyed draw: the key's uniform pair feeds the CMS transform.
double sample_sas(const AlphaStableParams& p, const RandomKey& key);

// Characteristic function value at theta (real-valued by symmetry).
double cf_value(const AlphaStableParams& p, double theta);

// Distribution function. Absolute accuracy 1e-8 or better on the whole line;
// exact at 0 (= 1/2) and under reflection (F(-x) = 1 - F(x) bitwise).
double cdf_sas(const AlphaStableParams& p, double x);

// Inverse of cdf_sas by bisection; p strictly inside (0,1).
double sas_quantile(const AlphaStableParams& p, double prob);

// Certificate that P(|X| >= t) <= coefficient * sigma^alpha * t^-alpha for
// sigma <= 1: the coefficient majorizes the exceedance ratio on a geometric
// grid of t >= valid_from_t (eighth-octave steps, so every dyadic t is a grid
// point) and the t -> infinity limit. Between grid points the guarantee
// degrades by at most the local grid-gap factor 2^(alpha/8).
struct TailBoundCert {
  double alpha = 0.0;
  double coefficient = 0.0;    // calibrated constant
  double asymptote = 0.0;      // 2 Gamma(alpha) sin(pi alpha / 2) / pi
  double valid_from_t = 1.0;
  std::vector<double> grid_t;  // where the ratio was evaluated
};

TailBoundCert calibrate_tail_constant(double alpha);

// The certified bound itself; requires t >= cert.valid_from_t, sigma <= 1, and
// matching alpha.
double tail_bound(const AlphaStableParams& p, double t, const TailBoundCert& cert);

// Var(X 1[|X| <= cutoff]) for X ~ SaS(alpha, sigma); the mean of the truncated
// variable is zero by symmetry, so this is the truncated second moment.
// Certified regime: cutoff >= 1, sigma <= 1.
double truncated_variance(const AlphaStableParams& p, double cutoff);

// Certificate that truncated_variance(K) <= coefficient * sigma^alpha * K^(2-alpha)
// for K >= 1, sigma <= 1, built the same way as the tail certificate.
struct TruncatedVarianceCert {
  double alpha = 0.0;
  double coefficient = 0.0;
  double asymptote = 0.0;          // alpha/(2-alpha) * tail asymptote
  std::vector<double> grid_cutoff;
};

TruncatedVarianceCert calibrate_truncated_variance_constant(double alpha);

double truncated_variance_bound(const AlphaStableParams& p, double cutoff,
                                const TruncatedVarianceCert& cert);

// Dispersion estimate: mean over the grid of -log|ecf(theta)| / |theta|^alpha,
// a consistent estimator of sigma^alpha. Throws grid_error whenever some
// |ecf(theta)| falls at or below 0.1, where the log amplifies sampling noise.
double dispersion_estimate(std::span<const double> sample, double alpha,
                           std::span<const double> theta_grid);

double dispersion_estimate(const EmpiricalSample& sample, double alpha,
                           std::span<const double> theta_grid);

}  // namespace stablesim
