#pragma once

// Keyed triangular array. Row k holds i.i.d. SaS(k^{-1/alpha}) entries
// addressed by 1-based column; rows are independent of each other. Y restricts
// X to the window [2^k, 2^{k^2}] (inclusive); Z snaps |Y| down onto a dyadic
// grid with spacing at most 1/d_k where d_k = floor(2^{2 alpha k/(2-alpha)}).
// Everything is a pure function of (alpha, master_seed, k, j, replica).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stablesim/errors.hpp"
#include "stablesim/stable.hpp"

namespace stablesim {

enum class Variant { X, Y, Z };  // raw, truncated, quantized

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ArraySpec {
  double alpha = 1.0;
  std::uint64_t master_seed = 0;
};

ArraySpec make_array_spec(double alpha, std::uint64_t master_seed);

// Row-length exponent 2 alpha k / (2 - alpha), snapped to the nearest integer
// when within 1e-9 of one (floating-point hygiene for exact dyadic cases).
double row_exponent(double alpha, std::uint32_t k);

// d_k = floor(2^exponent). The exponent must not exceed 62 (overflow guard).
std::uint64_t row_length(const ArraySpec& spec, std::uint32_t k);

// Precomputed per-row addressing and grid data, so per-entry work stays flat.
struct RowAddressing {
  std::uint32_t k = 0;
  double sigma = 1.0;      // k^{-1/alpha}
  double exponent = 0.0;   // snapped row-length exponent, may exceed 62
  bool literal = false;    // true when column j + d_k is representable
  std::uint64_t d = 0;     // d_k when literal, else 0
  int grid_exp = 0;        // Z grid spacing is 2^-grid_exp <= 1/d_k
  double gap_bound = 0.0;  // certified |Z - Y| ceiling: 1/d_k, or the spacing
  double window_lo = 0.0;  // 2^k
  double window_hi = 0.0;  // 2^{k^2}; +inf once k^2 exceeds the double range
};

RowAddressing row_addressing(const ArraySpec& spec, std::uint32_t k);

namespace detail {

// Key for the entry at column offset j. For coupled pairs the partner column
// j + d_k is the literal index whenever it is representable, which keeps the
// overlap between the two column windows consistent; otherwise the partner
// half lives on a disjoint keyed stream and independence does the same job.
inline RandomKey entry_key(const ArraySpec& spec, const RowAddressing& row,
                           std::uint64_t j, bool shifted, std::uint32_t replica) {
  RandomKey key;
  key.master_seed = spec.master_seed;
  key.k = row.k;
  key.replica = replica;
  if (shifted && row.literal) {
    key.j = j + row.d;
    key.tag = StreamTag::array_entry;
  } else {
    key.j = j;
    key.tag = shifted ? StreamTag::array_entry_shifted : StreamTag::array_entry;
  }
  return key;
}

}  // namespace detail

// Raw X draw; bitwise equal to sample_sas under the same key. The alpha = 1
// branch skips the exponential variate it would not use.
inline double raw_entry_at(const ArraySpec& spec, const RowAddressing& row,
                           std::uint64_t j, bool shifted, std::uint32_t replica) {
  const auto bits = random_bits(detail::entry_key(spec, row, j, shifted, replica));
  const double u = 3.14159265358979323846 * (unit_open(bits[0]) - 0.5);
  if (spec.alpha == 1.0) return row.sigma * std::tan(u);
  const double a = spec.alpha;
  const double e = -std::log(unit_open(bits[1]));
  const double core = std::sin(a * u) / std::pow(std::cos(u), 1.0 / a) *
                      std::pow(std::cos((1.0 - a) * u) / e, (1.0 - a) / a);
  return row.sigma * core;
}

double raw_entry(const ArraySpec& spec, std::uint32_t k, std::uint64_t j,
                 std::uint32_t replica);

// Y = x when 2^k <= |x| <= 2^{k^2} (both endpoints kept), else 0.
inline double truncate_entry_at(const RowAddressing& row, double x) {
  const double ax = std::fabs(x);
  return (ax >= row.window_lo && ax <= row.window_hi) ? x : 0.0;
}

double truncate_entry(const ArraySpec& spec, std::uint32_t k, double x);

// Z = sign(y) * floor(|y| * 2^g) * 2^-g with g = grid_exp. All three steps are
// exact in floating point, so 0 <= |y| - |z| < 2^-g <= 1/d_k holds with no
// rounding slop; whenever the grid is finer than one ulp of |y| the value is
// already a grid point and is returned unchanged.
inline double quantize_entry_at(const RowAddressing& row, double y) {
  if (y == 0.0) return 0.0;
  const double ay = std::fabs(y);
  if (std::ilogb(ay) + row.grid_exp >= 52) return y;
  const double scaled = ay * std::exp2(double(row.grid_exp));
  const double q = std::floor(scaled) * std::exp2(-double(row.grid_exp));
  return std::copysign(q, y);
}

double quantize_entry(const ArraySpec& spec, std::uint32_t k, double y);

double z_entry(const ArraySpec& spec, std::uint32_t k, std::uint64_t j,
               std::uint32_t replica);

// Lazily evaluated window of one row in one variant; O(1) memory per element.
class WindowView {
 public:
  WindowView(ArraySpec spec, std::uint32_t k, std::uint64_t j_begin,
             std::uint64_t j_end, Variant variant, std::uint32_t replica,
             std::uint64_t n_max = 0);

  class iterator {
   public:
    using value_type = double;
    using difference_type = std::ptrdiff_t;

    iterator(const WindowView* view, std::uint64_t j) : view_(view), j_(j) {}
    double operator*() const { return view_->at(j_); }
    iterator& operator++() { ++j_; return *this; }
    iterator operator++(int) { iterator t = *this; ++j_; return t; }
    bool operator==(const iterator& o) const { return j_ == o.j_; }
    bool operator!=(const iterator& o) const { return j_ != o.j_; }

   private:
    const WindowView* view_;
    std::uint64_t j_;
  };

  iterator begin() const { return iterator(this, j_begin_); }
  iterator end() const { return iterator(this, j_end_ + 1); }
  std::uint64_t size() const { return j_end_ + 1 - j_begin_; }
  double at(std::uint64_t j) const;

  const ArraySpec& spec() const { return spec_; }
  std::uint32_t k() const { return row_.k; }
  std::uint64_t j_begin() const { return j_begin_; }
  std::uint64_t j_end() const { return j_end_; }
  Variant variant() const { return variant_; }
  std::uint32_t replica() const { return replica_; }

 private:
  ArraySpec spec_;
  RowAddressing row_;
  std::uint64_t j_begin_;
  std::uint64_t j_end_;  // inclusive
  Variant variant_;
  std::uint32_t replica_;
};

WindowView window_entries(const ArraySpec& spec, std::uint32_t k,
                          std::uint64_t j_begin, std::uint64_t j_end,
                          Variant variant, std::uint32_t replica,
                          std::uint64_t n_max = 0);

// Streams a window to `path_base`.bin as little-endian 64-bit floats and
// writes a JSON sidecar `path_base`.json describing exactly what was dumped.
void dump_window(const WindowView& view, const std::string& path_base);

}  // namespace stablesim
