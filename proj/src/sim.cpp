#include "stablesim/sim.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace stablesim {

namespace {

// Compensated accumulator; the correction keeps long heavy-tailed sums honest.
struct Neumaier {
  double s = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = s + v;
    if (std::fabs(s) >= std::fabs(v)) {
      c += (s - t) + v;
    } else {
      c += (v - t) + s;
    }
    s = t;
  }
  double get() const { return s + c; }
};

// Snaps a real-valued range bound to the nearest integer when within 1e-9,
// then floors; keeps exact dyadic cases exact in floating point.
std::int64_t snapped_floor(double v) {
  const double r = std::round(v);
  if (std::fabs(v - r) < 1e-9) return std::int64_t(r);
  return std::int64_t(std::floor(v));
}

std::uint32_t k_small_bound(double alpha, double log2n) {
  const std::int64_t v = snapped_floor((1.0 / alpha - 0.5) * log2n);
  return v < 0 ? 0 : std::uint32_t(v);
}

std::uint32_t k_mid_bound(double alpha, double log2n) {
  const std::int64_t v = snapped_floor(log2n / alpha);
  return v < 0 ? 0 : std::uint32_t(v);
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 2.0) || !std::isfinite(alpha)) {
    throw validation_error("alpha must lie strictly inside (0, 2)");
  }
}

// Signed-entry accumulation with the three-way window classification. Every
// entry passes here exactly once, so the hard per-entry invariants are
// checked at generation time and surface as violation counts.
struct RangeAcc {
  Neumaier below, mid, above, z;
  bool any_mid = false;
  bool any_above = false;
  std::uint64_t violations = 0;

  void add_entry(const RowAddressing& row, double x, double sign) {
    const double ax = std::fabs(x);
    if (ax < row.window_lo) {
      below.add(sign * x);
      return;
    }
    if (ax > row.window_hi) {
      above.add(sign * x);
      any_above = true;
      return;
    }
    any_mid = true;
    mid.add(sign * x);
    const double zq = quantize_entry_at(row, x);
    z.add(sign * zq);
    if (!(std::fabs(x - zq) <= row.gap_bound) || zq == 0.0) ++violations;
  }

  RangeSums finish() const {
    RangeSums r;
    r.below = below.get();
    r.mid = mid.get();
    r.above = above.get();
    r.z = z.get();
    r.any_mid = any_mid;
    r.any_above = any_above;
    return r;
  }
};

void accumulate_paired_row(const ArraySpec& spec, const RowAddressing& row,
                           std::uint64_t n, std::uint32_t replica, RangeAcc& acc) {
  for (std::uint64_t j = 1; j <= n; ++j) {
    acc.add_entry(row, raw_entry_at(spec, row, j, false, replica), 1.0);
    acc.add_entry(row, raw_entry_at(spec, row, j, true, replica), -1.0);
  }
}

void accumulate_small_row(const ArraySpec& spec, const RowAddressing& row,
                          std::uint64_t n, SmallMode mode, std::uint32_t replica,
                          RangeAcc& acc) {
  // d_k <= n on the small range, so the coupled pair sum over columns [1, n]
  // telescopes to columns [1, d_k] minus columns [n+1, n+d_k].
  for (std::uint64_t j = 1; j <= row.d; ++j) {
    acc.add_entry(row, raw_entry_at(spec, row, j, false, replica), 1.0);
    if (mode == SmallMode::coupled) {
      acc.add_entry(row, raw_entry_at(spec, row, j + n, false, replica), -1.0);
    }
  }
}

}  // namespace

SmallMode parse_mode(const std::string& name) {
  if (name == "g_only") return SmallMode::g_only;
  if (name == "coupled") return SmallMode::coupled;
  throw validation_error("mode must be g_only or coupled");
}

std::string mode_name(SmallMode m) {
  return m == SmallMode::g_only ? "g_only" : "coupled";
}

double large_remainder(double alpha, std::uint64_t n, double coeff,
                       std::uint32_t beyond_k) {
  check_alpha(alpha);
  double s = 0.0;
  for (std::uint64_t k = std::uint64_t(beyond_k) + 1;; ++k) {
    const double term = std::exp2(-alpha * double(k)) / double(k);
    s += term;
    if (term < s * 1e-18 || term < 1e-300) break;
  }
  return 2.0 * double(n) * coeff * s;
}

ScaleRanges scale_ranges(double alpha, std::uint64_t n, double epsilon_tail,
                         const TailBoundCert& cert) {
  check_alpha(alpha);
  if (n < 2) throw validation_error("n must be >= 2");
  if (!(epsilon_tail > 0.0) || !(epsilon_tail < 1.0)) {
    throw validation_error("epsilon_tail must lie strictly inside (0, 1)");
  }
  if (cert.alpha != alpha) {
    throw validation_error("tail certificate was calibrated for a different alpha");
  }

  ScaleRanges r;
  r.alpha = alpha;
  r.n = n;
  r.epsilon_tail = epsilon_tail;
  r.tail_coefficient = cert.coefficient;
  const double log2n = std::log2(double(n));
  r.k_small_max = k_small_bound(alpha, log2n);
  r.k_mid_max = k_mid_bound(alpha, log2n);
  if (r.k_mid_max < r.k_small_max) r.k_mid_max = r.k_small_max;

  // d_k >= n must hold from the first medium row on; the exponent crosses
  // log2(n) exactly at the real-valued small/medium boundary.
  if (row_exponent(alpha, r.k_small_max + 1) < log2n - 1e-6) {
    throw std::logic_error("scale range boundary failed its d_k >= n guarantee");
  }

  std::uint32_t cap = r.k_mid_max;
  double rem = large_remainder(alpha, n, cert.coefficient, cap);
  while (rem >= epsilon_tail) {
    if (cap > r.k_mid_max + 100000) {
      throw std::logic_error("large-range cap search failed to converge");
    }
    ++cap;
    rem = large_remainder(alpha, n, cert.coefficient, cap);
  }
  r.k_large_cap = cap;
  r.large_tail_bound = rem;
  return r;
}

double theoretical_sigma_n(double alpha, std::uint64_t n) {
  check_alpha(alpha);
  if (n < 2) throw validation_error("n must be >= 2");
  const double log2n = std::log2(double(n));
  const std::uint32_t lo = k_small_bound(alpha, log2n);
  const std::uint32_t hi = k_mid_bound(alpha, log2n);
  if (hi <= lo) throw std::domain_error("medium scale range is empty for these (alpha, n)");
  double s = 0.0;
  for (std::uint32_t k = lo + 1; k <= hi; ++k) s += 1.0 / double(k);
  return 2.0 * s;
}

double limiting_sigma_alpha(double alpha) {
  check_alpha(alpha);
  return 2.0 * std::log(2.0 / (2.0 - alpha));
}

ReplicaBreakdown run_replica(const ArraySpec& spec, const ScaleRanges& ranges,
                             SmallMode mode, std::uint32_t replica, RangeMask mask) {
  ReplicaBreakdown out;
  out.replica = replica;

  if (mask.small && ranges.k_small_max >= 1) {
    RangeAcc acc;
    for (std::uint32_t k = 1; k <= ranges.k_small_max; ++k) {
      accumulate_small_row(spec, row_addressing(spec, k), ranges.n, mode, replica, acc);
    }
    out.small = acc.finish();
    out.quantizer_violations += acc.violations;
  }

  if (mask.medium) {
    RangeAcc acc;
    for (std::uint32_t k = ranges.k_small_max + 1; k <= ranges.k_mid_max; ++k) {
      accumulate_paired_row(spec, row_addressing(spec, k), ranges.n, replica, acc);
    }
    out.medium = acc.finish();
    out.quantizer_violations += acc.violations;
  }

  if (mask.large) {
    RangeAcc acc;
    for (std::uint32_t k = ranges.k_mid_max + 1; k <= ranges.k_large_cap; ++k) {
      accumulate_paired_row(spec, row_addressing(spec, k), ranges.n, replica, acc);
    }
    out.large = acc.finish();
    out.quantizer_violations += acc.violations;
  }

  return out;
}

std::uint64_t estimate_draws(const ScaleRanges& ranges, SmallMode mode,
                             std::uint32_t replicas, RangeMask mask) {
  long double per_replica = 0.0L;
  if (mask.small) {
    const ArraySpec probe{ranges.alpha, 0};
    for (std::uint32_t k = 1; k <= ranges.k_small_max; ++k) {
      const long double d = (long double)row_length(probe, k);
      per_replica += (mode == SmallMode::coupled) ? 2.0L * d : d;
    }
  }
  std::uint64_t paired_rows = 0;
  if (mask.medium) paired_rows += ranges.k_mid_max - ranges.k_small_max;
  if (mask.large) paired_rows += ranges.k_large_cap - ranges.k_mid_max;
  per_replica += 2.0L * (long double)ranges.n * (long double)paired_rows;

  const long double total = per_replica * (long double)replicas;
  if (total >= (long double)std::numeric_limits<std::uint64_t>::max()) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return std::uint64_t(total);
}

std::vector<ReplicaBreakdown> run_replicas(const ArraySpec& spec,
                                           const ScaleRanges& ranges,
                                           SmallMode mode, std::uint32_t replicas,
                                           std::uint64_t budget_draws,
                                           unsigned workers, RangeMask mask) {
  if (replicas < 1) throw validation_error("replicas must be >= 1");
  const std::uint64_t est = estimate_draws(ranges, mode, replicas, mask);
  if (est > budget_draws) {
    throw budget_error("run would need " + std::to_string(est) +
                           " draws, over the budget of " + std::to_string(budget_draws),
                       est, budget_draws);
  }

  std::vector<ReplicaBreakdown> out(replicas);
  if (workers <= 1) {
    for (std::uint32_t r = 0; r < replicas; ++r) {
      out[r] = run_replica(spec, ranges, mode, r, mask);
    }
    return out;
  }

  std::atomic<std::uint32_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::uint32_t r = next.fetch_add(1);
      if (r >= replicas) return;
      out[r] = run_replica(spec, ranges, mode, r, mask);
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(workers, replicas);
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

double range_value(const RangeSums& r, Variant variant) {
  switch (variant) {
    case Variant::X: return r.x();
    case Variant::Y: return r.mid;
    default: return r.z;
  }
}

double sum_medium(const ArraySpec& spec, const ScaleRanges& ranges,
                  std::uint32_t replica, Variant variant) {
  const ReplicaBreakdown b =
      run_replica(spec, ranges, SmallMode::coupled, replica, {false, true, false});
  return range_value(b.medium, variant);
}

double sum_small(const ArraySpec& spec, const ScaleRanges& ranges,
                 std::uint32_t replica, Variant variant, SmallMode mode) {
  const ReplicaBreakdown b =
      run_replica(spec, ranges, mode, replica, {true, false, false});
  return range_value(b.small, variant);
}

LargeSum sum_large(const ArraySpec& spec, const ScaleRanges& ranges,
                   std::uint32_t replica, Variant variant) {
  const ReplicaBreakdown b =
      run_replica(spec, ranges, SmallMode::coupled, replica, {false, false, true});
  return {range_value(b.large, variant), b.large.any_mid};
}

VSplit v_split_diagnostics(const ArraySpec& spec, const ScaleRanges& ranges,
                           std::uint32_t replica) {
  const ReplicaBreakdown b =
      run_replica(spec, ranges, SmallMode::coupled, replica, {false, true, false});
  return {b.medium.above, b.medium.below};
}

DecomposedSum decompose(const ReplicaBreakdown& b, Variant variant) {
  DecomposedSum s;
  s.replica = b.replica;
  s.part_small = range_value(b.small, variant);
  s.part_medium = range_value(b.medium, variant);
  s.part_large = range_value(b.large, variant);
  s.total = s.part_small + s.part_medium + s.part_large;
  s.v_over_nonzero = b.medium.any_above;
  s.mid_zy_gap = std::fabs(b.medium.z - b.medium.mid);
  return s;
}

SimulateResult simulate(const ArraySpec& spec, const ScaleRanges& ranges,
                        const SimulateOptions& options) {
  const auto breakdowns = run_replicas(spec, ranges, options.mode, options.replicas,
                                       options.budget_draws, options.workers);

  const double factor = std::pow(double(ranges.n), -1.0 / ranges.alpha);
  std::vector<DecomposedSum> sums;
  sums.reserve(breakdowns.size());
  std::vector<double> total, ps, pm, pl;
  total.reserve(breakdowns.size());
  ps.reserve(breakdowns.size());
  pm.reserve(breakdowns.size());
  pl.reserve(breakdowns.size());
  std::uint64_t large_hits = 0;
  for (const auto& b : breakdowns) {
    const DecomposedSum s = decompose(b, options.variant);
    total.push_back(factor * s.total);
    ps.push_back(factor * s.part_small);
    pm.push_back(factor * s.part_medium);
    pl.push_back(factor * s.part_large);
    if (b.large.any_mid) ++large_hits;
    sums.push_back(s);
  }

  SampleMeta meta{ranges.alpha, ranges.n, variant_name(options.variant),
                  spec.master_seed};
  SimulateResult res{
      ranges,
      factor,
      ranges.k_mid_max > ranges.k_small_max
          ? theoretical_sigma_n(ranges.alpha, ranges.n)
          : std::numeric_limits<double>::quiet_NaN(),
      limiting_sigma_alpha(ranges.alpha),
      std::move(sums),
      EmpiricalSample(std::move(total), meta),
      EmpiricalSample(std::move(ps), meta),
      EmpiricalSample(std::move(pm), meta),
      EmpiricalSample(std::move(pl), meta),
      double(large_hits) / double(breakdowns.size())};
  return res;
}

}  // namespace stablesim
