#pragma once

// Goodness-of-fit statistics over sorted empirical samples: exact KS distance
// against a reference law (both one-sided envelopes), two-sample KS, the
// empirical characteristic function modulus, quantile-quantile points, and
// sequence-level trend verdicts.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stablesim/empirical.hpp"
#include "stablesim/stable.hpp"

namespace stablesim {

// sup_x |F_n(x) - F(x)| using both the pre- and post-jump envelope at every
// sample point, so the supremum is exact for the step function.
double ks_distance(const EmpiricalSample& sample, const AlphaStableParams& reference);

// Two-sample KS statistic by a merge scan over both sorted samples.
double ks_two_sample(const EmpiricalSample& a, const EmpiricalSample& b);

// Acceptance thresholds are multiples of the asymptotic 95% Kolmogorov band.
double ks_threshold(std::size_t n, double multiples);

// (theta, |ecf(theta)|) per grid point. theta = 0 gives exactly 1.
std::vector<std::pair<double, double>> ecf_modulus(const EmpiricalSample& sample,
                                                   std::span<const double> theta_grid);

struct QQPoint {
  double p = 0.0;
  double q_reference = 0.0;
  double q_empirical = 0.0;
};

// 99 evenly spaced probability levels; reference quantiles by bisection on
// the numeric CDF, empirical quantiles from the order statistics.
std::vector<QQPoint> qq_points(const EmpiricalSample& sample,
                               const AlphaStableParams& reference);

enum class TrendExpectation { decreasing, bounded_by_inverse_log };

struct TrendPoint {
  double n = 0.0;      // grid size the value was measured at; must increase
  double value = 0.0;  // nonnegative statistic
  double se = 0.0;     // Monte Carlo standard error, 0 for exact values
};

struct TrendVerdict {
  bool pass = false;
  bool nonincreasing = false;  // within a 3-SE slack per adjacent pair
  double fitted_c = 0.0;       // least-squares c in value ~ c / log2(n)
  double c_ratio = 0.0;        // spread of value * log2(n) across the grid
  std::string details;
};

// decreasing: every adjacent pair nonincreasing within 3 combined SE.
// bounded_by_inverse_log: the products value*log2(n) stay within
// `stability_factor` of each other (max/min), and fitted_c is reported.
// Fewer than 3 points cannot support a trend verdict: domain_error.
TrendVerdict trend_check(std::span<const TrendPoint> points,
                         TrendExpectation expected,
                         double stability_factor = 2.0);

struct GoFReport {
  double ks = 0.0;
  AlphaStableParams reference{1.0, 1.0};
  std::uint64_t sample_count = 0;
  std::vector<QQPoint> qq;
  bool pass = false;
  double threshold = 0.0;
};

GoFReport make_gof_report(const EmpiricalSample& sample,
                          const AlphaStableParams& reference,
                          double threshold_multiples);

// JSON object with fields ks, reference{alpha,sigma}, sample_count, pass,
// threshold. Round-trips bit-exactly through shortest-round-trip doubles.
std::string gof_report_json(const GoFReport& report);
GoFReport gof_report_from_json(const std::string& text);

}  // namespace stablesim
