#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stablesim/empirical.hpp"
#include "stablesim/errors.hpp"
#include "stablesim/gof.hpp"
#include "stablesim/rng.hpp"
#include "stablesim/stable.hpp"

using namespace stablesim;

namespace {

EmpiricalSample cauchy_sample(std::size_t count, std::uint64_t seed) {
  const AlphaStableParams p = make_params(1.0, 1.0);
  std::vector<double> draws(count);
  RandomKey key;
  key.master_seed = seed;
  key.tag = StreamTag::generic;
  for (std::size_t i = 0; i < count; ++i) {
    key.j = i;
    draws[i] = sample_sas(p, key);
  }
  return EmpiricalSample(std::move(draws), SampleMeta{1.0, 1, "X", seed});
}

}  // namespace

TEST_CASE("samples are sorted on construction and reject non-finite values") {
  EmpiricalSample s({3.0, -1.0, 2.0}, SampleMeta{1.0, 1, "X", 0});
  CHECK(s.n() == 3);
  CHECK(s.values()[0] == -1.0);
  CHECK(s.values()[2] == 3.0);
  CHECK_THROWS_AS(EmpiricalSample({1.0, NAN}, SampleMeta{1.0, 1, "X", 0}),
                  validation_error);
}

TEST_CASE("ks distance of a point mass at the median is one half") {
  const AlphaStableParams cauchy = make_params(1.0, 1.0);
  EmpiricalSample one({0.0}, SampleMeta{1.0, 1, "X", 0});
  // F(0) = 1/2 and the empirical cdf jumps 0 -> 1 there; both envelopes
  // meet at exactly 1/2.
  CHECK(ks_distance(one, cauchy) == 0.5);
}

TEST_CASE("ks distance uses both envelopes around each jump") {
  const AlphaStableParams cauchy = make_params(1.0, 1.0);
  // Two points at the quartiles: F = 0.25 and 0.75 there, empirical cdf
  // steps 0 -> 0.5 -> 1, so every envelope gap is exactly 0.25.
  EmpiricalSample two({-1.0, 1.0}, SampleMeta{1.0, 2, "X", 0});
  CHECK(ks_distance(two, cauchy) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("ks distance of a faithful sample is small") {
  const AlphaStableParams cauchy = make_params(1.0, 1.0);
  EmpiricalSample s = cauchy_sample(100000, 42);
  CHECK(ks_distance(s, cauchy) < ks_threshold(100000, 1.5));
  // Shifting the sample far off the law must push the distance up.
  std::vector<double> shifted(s.values());
  for (double& v : shifted) v += 3.0;
  EmpiricalSample bad(std::move(shifted), s.meta());
  CHECK(ks_distance(bad, cauchy) > 0.3);
}

TEST_CASE("two-sample ks detects agreement and disagreement") {
  EmpiricalSample a = cauchy_sample(50000, 1);
  EmpiricalSample b = cauchy_sample(50000, 2);
  CHECK(ks_two_sample(a, b) < 0.02);
  CHECK(ks_two_sample(a, a) == 0.0);

  std::vector<double> scaled(a.values());
  for (double& v : scaled) v *= 3.0;
  EmpiricalSample c(std::move(scaled), a.meta());
  // sup_x |atan(x) - atan(x/3)| / pi = 1/6, attained at x = sqrt(3).
  CHECK(ks_two_sample(a, c) == doctest::Approx(1.0 / 6.0).epsilon(0.05));
}

TEST_CASE("two-sample ks handles ties across both samples") {
  // Heavy ties: the scan must advance both sides through equal values before
  // measuring the gap, or it would see a spurious jump inside the tie block.
  EmpiricalSample a({0.0, 0.0, 0.0, 1.0}, SampleMeta{1.0, 1, "X", 0});
  EmpiricalSample b({0.0, 0.0, 1.0, 1.0}, SampleMeta{1.0, 1, "X", 0});
  CHECK(ks_two_sample(a, b) == doctest::Approx(0.25).epsilon(1e-12));
  EmpiricalSample c({0.0, 0.0}, SampleMeta{1.0, 1, "X", 0});
  EmpiricalSample d({0.0, 0.0, 0.0}, SampleMeta{1.0, 1, "X", 0});
  CHECK(ks_two_sample(c, d) == 0.0);
}

TEST_CASE("ks threshold scales like the kolmogorov band") {
  CHECK(ks_threshold(10000, 1.0) == doctest::Approx(0.0136).epsilon(1e-12));
  CHECK(ks_threshold(10000, 1.5) == doctest::Approx(0.0204).epsilon(1e-12));
  CHECK(ks_threshold(100, 1.0) == doctest::Approx(0.136).epsilon(1e-12));
}

TEST_CASE("ecf modulus is exactly one at theta zero") {
  EmpiricalSample s = cauchy_sample(1000, 3);
  const std::vector<double> thetas{0.0, 0.5, 1.0};
  const auto mods = ecf_modulus(s, thetas);
  REQUIRE(mods.size() == 3);
  CHECK(mods[0].first == 0.0);
  CHECK(mods[0].second == 1.0);
  CHECK(mods[1].second > 0.0);
  CHECK(mods[1].second <= 1.0);
}

TEST_CASE("ecf modulus of a constant sample is one everywhere") {
  EmpiricalSample s({2.5, 2.5, 2.5, 2.5}, SampleMeta{1.0, 1, "X", 0});
  const std::vector<double> thetas{0.0, 0.3, 2.0};
  for (const auto& [theta, modulus] : ecf_modulus(s, thetas)) {
    CHECK(modulus == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ecf modulus tracks the characteristic function") {
  EmpiricalSample s = cauchy_sample(1000000, 42);
  const std::vector<double> thetas{1.0};
  const auto mods = ecf_modulus(s, thetas);
  // |ecf(1)| estimates e^{-1}; the Monte Carlo error at this size is ~7e-4.
  CHECK(mods[0].second == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
  CHECK(std::fabs(mods[0].second - std::exp(-1.0)) < 0.003);
}

TEST_CASE("qq points pair reference and empirical quantiles") {
  const AlphaStableParams cauchy = make_params(1.0, 1.0);
  EmpiricalSample s = cauchy_sample(100000, 5);
  const auto points = qq_points(s, cauchy);
  REQUIRE(points.size() == 99);
  CHECK(points.front().p == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(points.back().p == doctest::Approx(0.99).epsilon(1e-12));
  for (const auto& pt : points) {
    // Empirical quantiles of a faithful sample hug the reference in the
    // body of the law; tails are noisier, so compare the middle only.
    if (pt.p >= 0.2 && pt.p <= 0.8) {
      CHECK(pt.q_empirical == doctest::Approx(pt.q_reference).epsilon(0.05));
    }
  }
  // The median point is F^{-1}(0.5) = 0.
  CHECK(points[49].q_reference == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("trend verdicts need at least three points") {
  std::vector<TrendPoint> two{{256.0, 0.5, 0.0}, {4096.0, 0.4, 0.0}};
  CHECK_THROWS_AS(trend_check(two, TrendExpectation::decreasing),
                  std::domain_error);
}

TEST_CASE("trend verdicts validate their grid") {
  std::vector<TrendPoint> unordered{{4096.0, 0.5, 0.0},
                                    {256.0, 0.4, 0.0},
                                    {65536.0, 0.3, 0.0}};
  CHECK_THROWS_AS(trend_check(unordered, TrendExpectation::decreasing),
                  validation_error);
  std::vector<TrendPoint> negative_se{{256.0, 0.5, -1.0},
                                      {4096.0, 0.4, 0.0},
                                      {65536.0, 0.3, 0.0}};
  CHECK_THROWS_AS(trend_check(negative_se, TrendExpectation::decreasing),
                  validation_error);
}

TEST_CASE("a clean inverse-log decay passes both expectations") {
  std::vector<TrendPoint> points;
  const double c = 0.8;
  for (double n : {256.0, 4096.0, 65536.0}) {
    points.push_back({n, c / std::log2(n), 0.0});
  }
  const TrendVerdict dec = trend_check(points, TrendExpectation::decreasing);
  CHECK(dec.pass);
  CHECK(dec.nonincreasing);

  const TrendVerdict bound =
      trend_check(points, TrendExpectation::bounded_by_inverse_log);
  CHECK(bound.pass);
  CHECK(bound.fitted_c == doctest::Approx(c).epsilon(1e-12));
  CHECK(bound.c_ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("an increasing sequence fails the decreasing expectation") {
  std::vector<TrendPoint> points{{256.0, 0.1, 0.0},
                                 {4096.0, 0.2, 0.0},
                                 {65536.0, 0.4, 0.0}};
  const TrendVerdict v = trend_check(points, TrendExpectation::decreasing);
  CHECK_FALSE(v.pass);
  CHECK_FALSE(v.nonincreasing);
}

TEST_CASE("noise within the error bars does not fail the decreasing trend") {
  // A tiny uptick far inside 3 combined SEs is consistent with decreasing.
  std::vector<TrendPoint> points{{256.0, 0.50, 0.02},
                                 {4096.0, 0.51, 0.02},
                                 {65536.0, 0.40, 0.02}};
  const TrendVerdict v = trend_check(points, TrendExpectation::decreasing);
  CHECK(v.pass);
  // The same uptick with no error bars is a hard violation.
  for (auto& pt : points) pt.se = 0.0;
  CHECK_FALSE(trend_check(points, TrendExpectation::decreasing).pass);
}

TEST_CASE("drifting products fail the inverse-log boundedness") {
  // value * log2(n) spans a factor 4 here, beyond the stability factor 2.
  std::vector<TrendPoint> points{{256.0, 0.8 / 8.0, 0.0},
                                 {4096.0, 0.4 / 12.0, 0.0},
                                 {65536.0, 0.2 / 16.0, 0.0}};
  const TrendVerdict v =
      trend_check(points, TrendExpectation::bounded_by_inverse_log);
  CHECK_FALSE(v.pass);
  CHECK(v.c_ratio == doctest::Approx(4.0).epsilon(1e-12));
  // A wider stability factor admits the same sequence.
  CHECK(trend_check(points, TrendExpectation::bounded_by_inverse_log, 5.0).pass);
}

TEST_CASE("gof reports round-trip through json bit-exactly") {
  const AlphaStableParams reference = make_params(1.0, 1.2599210498948732);
  EmpiricalSample s = cauchy_sample(20000, 11);
  const GoFReport report = make_gof_report(s, reference, 1.5);
  CHECK(report.sample_count == 20000);
  CHECK(report.threshold == ks_threshold(20000, 1.5));
  CHECK(report.qq.size() == 99);
  CHECK(report.pass == (report.ks <= report.threshold));

  const std::string text = gof_report_json(report);
  const GoFReport back = gof_report_from_json(text);
  CHECK(back.ks == report.ks);
  CHECK(back.reference.alpha == report.reference.alpha);
  CHECK(back.reference.sigma == report.reference.sigma);
  CHECK(back.sample_count == report.sample_count);
  CHECK(back.pass == report.pass);
  CHECK(back.threshold == report.threshold);
  // Serializing again reproduces the same bytes.
  GoFReport copy = back;
  copy.qq = report.qq;
  CHECK(gof_report_json(copy) == text);
}
