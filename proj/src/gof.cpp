#include "stablesim/gof.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace stablesim {

double ks_distance(const EmpiricalSample& sample, const AlphaStableParams& reference) {
  const auto& v = sample.values();
  if (v.empty()) throw std::domain_error("ks_distance needs a nonempty sample");
  const double n = double(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf_sas(reference, v[i]);
    d = std::max(d, f - double(i) / n);
    d = std::max(d, double(i + 1) / n - f);
  }
  return d;
}

double ks_two_sample(const EmpiricalSample& a, const EmpiricalSample& b) {
  const auto& x = a.values();
  const auto& y = b.values();
  if (x.empty() || y.empty()) throw std::domain_error("ks_two_sample needs nonempty samples");
  const double nx = double(x.size());
  const double ny = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::fabs(double(i) / nx - double(j) / ny));
  }
  return d;
}

double ks_threshold(std::size_t n, double multiples) {
  if (n == 0) throw std::domain_error("ks_threshold needs n > 0");
  return multiples * 1.36 / std::sqrt(double(n));
}

std::vector<std::pair<double, double>> ecf_modulus(const EmpiricalSample& sample,
                                                   std::span<const double> theta_grid) {
  const auto& v = sample.values();
  if (v.empty()) throw std::domain_error("ecf_modulus needs a nonempty sample");
  std::vector<std::pair<double, double>> out;
  out.reserve(theta_grid.size());
  for (const double theta : theta_grid) {
    if (theta == 0.0) {
      out.emplace_back(theta, 1.0);
      continue;
    }
    double re = 0.0, im = 0.0;
    for (const double x : v) {
      re += std::cos(theta * x);
      im += std::sin(theta * x);
    }
    out.emplace_back(theta, std::hypot(re, im) / double(v.size()));
  }
  return out;
}

std::vector<QQPoint> qq_points(const EmpiricalSample& sample,
                               const AlphaStableParams& reference) {
  const auto& v = sample.values();
  if (v.empty()) throw std::domain_error("qq_points needs a nonempty sample");
  std::vector<QQPoint> out;
  out.reserve(99);
  for (int i = 1; i <= 99; ++i) {
    const double p = double(i) / 100.0;
    QQPoint q;
    q.p = p;
    q.q_reference = sas_quantile(reference, p);
    // Inverse empirical CDF: smallest order statistic with rank/n >= p.
    std::size_t rank = std::size_t(std::ceil(p * double(v.size())));
    if (rank == 0) rank = 1;
    if (rank > v.size()) rank = v.size();
    q.q_empirical = v[rank - 1];
    out.push_back(q);
  }
  return out;
}

TrendVerdict trend_check(std::span<const TrendPoint> points, TrendExpectation expected,
                         double stability_factor) {
  if (points.size() < 3) {
    throw std::domain_error("trend_check needs at least 3 grid points");
  }
  if (!(stability_factor >= 1.0)) {
    throw validation_error("trend_check stability_factor must be >= 1");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].n > 1.0) || !std::isfinite(points[i].value) || points[i].se < 0.0) {
      throw validation_error("trend_check point with n <= 1, non-finite value, or negative se");
    }
    if (i > 0 && !(points[i].n > points[i - 1].n)) {
      throw validation_error("trend_check grid must be strictly increasing in n");
    }
  }

  TrendVerdict verdict;
  verdict.nonincreasing = true;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double slack =
        3.0 * std::sqrt(points[i].se * points[i].se + points[i + 1].se * points[i + 1].se);
    if (points[i + 1].value > points[i].value + slack) {
      verdict.nonincreasing = false;
      char buf[160];
      std::snprintf(buf, sizeof buf, "value rose from %.6g (n=%.6g) to %.6g (n=%.6g) beyond slack %.3g; ",
                    points[i].value, points[i].n, points[i + 1].value, points[i + 1].n, slack);
      verdict.details += buf;
    }
  }

  // Least squares for value ~ c / log2(n), and the spread of the products.
  double swv = 0.0, sww = 0.0;
  double cmin = HUGE_VAL, cmax = -HUGE_VAL;
  for (const auto& p : points) {
    const double ell = std::log2(p.n);
    swv += p.value / ell;
    sww += 1.0 / (ell * ell);
    const double c = p.value * ell;
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  verdict.fitted_c = swv / sww;
  verdict.c_ratio = (cmin > 0.0) ? cmax / cmin : HUGE_VAL;

  if (expected == TrendExpectation::decreasing) {
    verdict.pass = verdict.nonincreasing;
  } else {
    verdict.pass = verdict.c_ratio <= stability_factor;
    if (!verdict.pass) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "value*log2(n) spread %.4g exceeds factor %.4g; ",
                    verdict.c_ratio, stability_factor);
      verdict.details += buf;
    }
  }
  return verdict;
}

GoFReport make_gof_report(const EmpiricalSample& sample, const AlphaStableParams& reference,
                          double threshold_multiples) {
  GoFReport report;
  report.reference = reference;
  report.sample_count = sample.n();
  report.ks = ks_distance(sample, reference);
  report.threshold = ks_threshold(sample.n(), threshold_multiples);
  report.qq = qq_points(sample, reference);
  report.pass = report.ks <= report.threshold;
  return report;
}

std::string gof_report_json(const GoFReport& report) {
  nlohmann::json j;
  j["ks"] = report.ks;
  j["reference"] = {{"alpha", report.reference.alpha}, {"sigma", report.reference.sigma}};
  j["sample_count"] = report.sample_count;
  j["pass"] = report.pass;
  j["threshold"] = report.threshold;
  return j.dump(2);
}

GoFReport gof_report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GoFReport report;
  report.ks = j.at("ks").get<double>();
  report.reference.alpha = j.at("reference").at("alpha").get<double>();
  report.reference.sigma = j.at("reference").at("sigma").get<double>();
  report.sample_count = j.at("sample_count").get<std::uint64_t>();
  report.pass = j.at("pass").get<bool>();
  report.threshold = j.at("threshold").get<double>();
  return report;
}

}  // namespace stablesim
