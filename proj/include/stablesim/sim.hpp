#pragma once

// Scale decomposition of the partial sums. Row indices split into a small
// range [1, k_small_max], a medium range (k_small_max, k_mid_max], and a large
// range (k_mid_max, k_large_cap] whose neglected remainder is bounded
// analytically. Each replica is a pure function of (spec, ranges, replica).

#include <cstdint>
#include <string>
#include <vector>

#include "stablesim/array.hpp"
#include "stablesim/empirical.hpp"
#include "stablesim/stable.hpp"

namespace stablesim {

enum class SmallMode { g_only, coupled };

SmallMode parse_mode(const std::string& name);
std::string mode_name(SmallMode m);

struct ScaleRanges {
  double alpha = 1.0;
  std::uint64_t n = 2;
  double epsilon_tail = 1e-3;
  std::uint32_t k_small_max = 0;   // small = [1, k_small_max]; 0 means empty
  std::uint32_t k_mid_max = 0;     // medium = (k_small_max, k_mid_max]
  std::uint32_t k_large_cap = 0;   // large = (k_mid_max, k_large_cap]
  double large_tail_bound = 0.0;   // analytic mass beyond the cap, < epsilon_tail
  double tail_coefficient = 0.0;   // calibrated constant used by the remainder
};

// Chooses k_large_cap minimal with remainder < epsilon_tail. The certificate
// supplies the tail constant; it must be calibrated for the same alpha.
ScaleRanges scale_ranges(double alpha, std::uint64_t n, double epsilon_tail,
                         const TailBoundCert& cert);

// 2 n * coeff * sum_{k > beyond_k} 2^{-alpha k} / k: the union-bound mass of
// window hits at rows past beyond_k.
double large_remainder(double alpha, std::uint64_t n, double coeff,
                       std::uint32_t beyond_k);

// sigma_n^alpha = 2 sum_{k in medium} 1/k. Throws when the medium range is empty.
double theoretical_sigma_n(double alpha, std::uint64_t n);

// Its n -> infinity limit, 2 ln(2/(2 - alpha)).
double limiting_sigma_alpha(double alpha);

// Signed sums accumulated over one scale range of one replica. The raw-entry
// sum is assembled as mid + (below + above); with that fixed association,
// x(range) == y(range) + (v_over + v_under) holds bitwise, not just to
// rounding.
struct RangeSums {
  double below = 0.0;   // entries with |X| < 2^k
  double mid = 0.0;     // entries inside the window (the Y sum)
  double above = 0.0;   // entries with |X| > 2^{k^2}
  double z = 0.0;       // quantized window entries (the Z sum)
  bool any_mid = false;
  bool any_above = false;
  double x() const { return mid + (below + above); }
};

struct ReplicaBreakdown {
  std::uint32_t replica = 0;
  RangeSums small;    // coupled pair sums, or one-sided sums in g_only mode
  RangeSums medium;
  RangeSums large;
  std::uint64_t quantizer_violations = 0;  // |Z-Y| beyond grid spacing, or zero-pattern mismatch
};

struct RangeMask {
  bool small = true;
  bool medium = true;
  bool large = true;
};

ReplicaBreakdown run_replica(const ArraySpec& spec, const ScaleRanges& ranges,
                             SmallMode mode, std::uint32_t replica,
                             RangeMask mask = {});

// Draws one run will consume; computed before any work is done.
std::uint64_t estimate_draws(const ScaleRanges& ranges, SmallMode mode,
                             std::uint32_t replicas, RangeMask mask = {});

// Replica-level fan-out. Results are stored by replica index, so the output
// is bit-identical for any worker count. Throws budget_error up front when
// the draw estimate exceeds budget_draws.
std::vector<ReplicaBreakdown> run_replicas(const ArraySpec& spec,
                                           const ScaleRanges& ranges,
                                           SmallMode mode, std::uint32_t replicas,
                                           std::uint64_t budget_draws,
                                           unsigned workers, RangeMask mask = {});

// ---------------------------------------------------------------------------
// Per-part views
// ---------------------------------------------------------------------------

double range_value(const RangeSums& r, Variant variant);

// Medium-range pair sum in one variant. For variant X the law is exactly
// SaS(sigma_n * n^{1/alpha}).
double sum_medium(const ArraySpec& spec, const ScaleRanges& ranges,
                  std::uint32_t replica, Variant variant);

// Small-range part: g_only returns G_n = sum_k sum_{j<=d_k} W_k(j); coupled
// returns sum_k sum_{j<=n} (W_k(j) - W_k(j+d_k)), evaluated in its telescoped
// form sum_{j<=d_k} (W_k(j) - W_k(j+n)) (the same random variable, since the
// middle columns cancel; d_k <= n on the small range).
double sum_small(const ArraySpec& spec, const ScaleRanges& ranges,
                 std::uint32_t replica, Variant variant, SmallMode mode);

struct LargeSum {
  double value = 0.0;
  bool nonzero = false;  // some entry fell inside its truncation window
};

LargeSum sum_large(const ArraySpec& spec, const ScaleRanges& ranges,
                   std::uint32_t replica, Variant variant);

// The medium-range X/Y discrepancy split by which side of the window the raw
// entry fell on. v_over + v_under == medium(X) - medium(Y) exactly, because
// medium(X) is assembled as medium(Y) + v_over + v_under.
struct VSplit {
  double v_over = 0.0;   // entries beyond 2^{k^2}
  double v_under = 0.0;  // entries below 2^k
};

VSplit v_split_diagnostics(const ArraySpec& spec, const ScaleRanges& ranges,
                           std::uint32_t replica);

// ---------------------------------------------------------------------------
// Monte Carlo assembly
// ---------------------------------------------------------------------------

struct DecomposedSum {
  double part_small = 0.0;
  double part_medium = 0.0;
  double part_large = 0.0;
  double total = 0.0;  // part_small + part_medium + part_large, by assembly
  bool v_over_nonzero = false;
  double mid_zy_gap = 0.0;  // |medium(Z) - medium(Y)|
  std::uint32_t replica = 0;
};

DecomposedSum decompose(const ReplicaBreakdown& b, Variant variant);

struct SimulateOptions {
  Variant variant = Variant::Z;
  SmallMode mode = SmallMode::coupled;
  std::uint32_t replicas = 1;
  std::uint64_t budget_draws = std::uint64_t(1) << 32;
  unsigned workers = 1;
};

struct SimulateResult {
  ScaleRanges ranges;
  double scale_factor = 1.0;       // n^{-1/alpha}
  double sigma_n_alpha = 0.0;      // NaN when the medium range is empty
  double sigma_limit_alpha = 0.0;  // 2 ln(2/(2-alpha))
  std::vector<DecomposedSum> sums; // by replica, unscaled
  EmpiricalSample total;           // scaled by n^{-1/alpha}
  EmpiricalSample part_small;
  EmpiricalSample part_medium;
  EmpiricalSample part_large;
  double large_nonzero_fraction = 0.0;
};

SimulateResult simulate(const ArraySpec& spec, const ScaleRanges& ranges,
                        const SimulateOptions& options);

}  // namespace stablesim
