#include "stablesim/array.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace stablesim {

namespace {

void check_spec(const ArraySpec& spec) {
  if (!(spec.alpha > 0.0) || !(spec.alpha < 2.0) || !std::isfinite(spec.alpha)) {
    throw validation_error("alpha must lie strictly inside (0, 2)");
  }
}

void check_k(std::uint32_t k) {
  if (k < 1) throw validation_error("row index k must be >= 1");
  if (k > 0xFFFF) throw std::range_error("row index k exceeds the keyable range");
}

}  // namespace

Variant parse_variant(const std::string& name) {
  if (name == "X") return Variant::X;
  if (name == "Y") return Variant::Y;
  if (name == "Z") return Variant::Z;
  throw validation_error("variant must be one of X, Y, Z");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::X: return "X";
    case Variant::Y: return "Y";
    default: return "Z";
  }
}

ArraySpec make_array_spec(double alpha, std::uint64_t master_seed) {
  ArraySpec spec{alpha, master_seed};
  check_spec(spec);
  return spec;
}

double row_exponent(double alpha, std::uint32_t k) {
  const double e = 2.0 * alpha * double(k) / (2.0 - alpha);
  const double r = std::round(e);
  return (std::fabs(e - r) < 1e-9) ? r : e;
}

std::uint64_t row_length(const ArraySpec& spec, std::uint32_t k) {
  check_spec(spec);
  check_k(k);
  const double e = row_exponent(spec.alpha, k);
  if (e > 62.0) {
    throw std::range_error("row length exponent " + std::to_string(e) +
                           " exceeds the 62-bit guard at k=" + std::to_string(k));
  }
  if (e == std::floor(e)) return std::uint64_t(1) << std::uint32_t(e);
  return std::uint64_t(std::floor(std::exp2(e)));
}

RowAddressing row_addressing(const ArraySpec& spec, std::uint32_t k) {
  check_spec(spec);
  check_k(k);
  RowAddressing row;
  row.k = k;
  row.sigma = std::pow(double(k), -1.0 / spec.alpha);
  row.exponent = row_exponent(spec.alpha, k);
  row.literal = row.exponent <= 62.0;
  row.d = row.literal ? row_length(spec, k) : 0;
  row.grid_exp = int(std::ceil(row.exponent));
  row.gap_bound = row.literal ? 1.0 / double(row.d) : std::exp2(-double(row.grid_exp));
  row.window_lo = std::exp2(double(k));
  row.window_hi = std::exp2(double(k) * double(k));  // +inf once k^2 > 1024
  return row;
}

double raw_entry(const ArraySpec& spec, std::uint32_t k, std::uint64_t j,
                 std::uint32_t replica) {
  check_spec(spec);
  check_k(k);
  if (j < 1) throw validation_error("column index j must be >= 1");
  return raw_entry_at(spec, row_addressing(spec, k), j, false, replica);
}

double truncate_entry(const ArraySpec& spec, std::uint32_t k, double x) {
  check_spec(spec);
  check_k(k);
  if (!std::isfinite(x)) throw validation_error("entry must be finite");
  return truncate_entry_at(row_addressing(spec, k), x);
}

double quantize_entry(const ArraySpec& spec, std::uint32_t k, double y) {
  check_spec(spec);
  check_k(k);
  if (!std::isfinite(y)) throw validation_error("entry must be finite");
  const RowAddressing row = row_addressing(spec, k);
  if (y != 0.0) {
    const double ay = std::fabs(y);
    if (ay < row.window_lo || ay > row.window_hi) {
      throw validation_error("quantizer input must be 0 or lie in the truncation window");
    }
  }
  return quantize_entry_at(row, y);
}

double z_entry(const ArraySpec& spec, std::uint32_t k, std::uint64_t j,
               std::uint32_t replica) {
  check_spec(spec);
  check_k(k);
  if (j < 1) throw validation_error("column index j must be >= 1");
  const RowAddressing row = row_addressing(spec, k);
  return quantize_entry_at(row, truncate_entry_at(row, raw_entry_at(spec, row, j, false, replica)));
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

WindowView::WindowView(ArraySpec spec, std::uint32_t k, std::uint64_t j_begin,
                       std::uint64_t j_end, Variant variant, std::uint32_t replica,
                       std::uint64_t n_max)
    : spec_(spec), row_(row_addressing(spec, k)), j_begin_(j_begin), j_end_(j_end),
      variant_(variant), replica_(replica) {
  if (j_begin < 1) throw std::range_error("window columns start at 1");
  if (j_end + 1 < j_begin) throw std::range_error("window end precedes its start");
  if (!row_.literal) {
    throw std::range_error("row length exponent exceeds the 62-bit guard; no windows there");
  }
  const std::uint64_t limit = std::max(2 * row_.d, row_.d + n_max);
  if (j_end > limit) {
    throw std::range_error("window exceeds the row extent max(2 d_k, d_k + n_max)");
  }
}

double WindowView::at(std::uint64_t j) const {
  const double x = raw_entry_at(spec_, row_, j, false, replica_);
  if (variant_ == Variant::X) return x;
  const double y = truncate_entry_at(row_, x);
  if (variant_ == Variant::Y) return y;
  return quantize_entry_at(row_, y);
}

WindowView window_entries(const ArraySpec& spec, std::uint32_t k,
                          std::uint64_t j_begin, std::uint64_t j_end,
                          Variant variant, std::uint32_t replica,
                          std::uint64_t n_max) {
  check_spec(spec);
  check_k(k);
  return WindowView(spec, k, j_begin, j_end, variant, replica, n_max);
}

void dump_window(const WindowView& view, const std::string& path_base) {
  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + path_base + ".bin for writing");
  static_assert(sizeof(double) == 8);
  // Little-endian hosts write doubles directly; this library targets x86-64.
  for (double v : view) {
    bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  bin.close();

  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"alpha\": %.17g, \"k\": %u, \"j_begin\": %llu, \"j_end\": %llu, "
                "\"replica\": %u, \"variant\": \"%s\", \"master_seed\": %llu}\n",
                view.spec().alpha, view.k(),
                (unsigned long long)view.j_begin(), (unsigned long long)view.j_end(),
                view.replica(), variant_name(view.variant()).c_str(),
                (unsigned long long)view.spec().master_seed);
  std::ofstream side(path_base + ".json");
  if (!side) throw std::runtime_error("cannot open " + path_base + ".json for writing");
  side << buf;
}

}  // namespace stablesim
