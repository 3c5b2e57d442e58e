#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stablesim/errors.hpp"

namespace stablesim {

// Measurement context carried alongside a sample so reports can say what
// was measured and under which seed.
struct SampleMeta {
  double alpha = 0.0;
  std::uint64_t n_sum = 0;  // partial-sum length behind each value (0 = raw draws)
  std::string variant;      // "X", "Y", "Z", or a free-form label
  std::uint64_t seed = 0;
};

// A sorted sample. Values are nondecreasing and finite; n() == values().size().
class EmpiricalSample {
 public:
  EmpiricalSample(std::vector<double> values, SampleMeta meta)
      : values_(std::move(values)), meta_(std::move(meta)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw validation_error("sample contains a non-finite value");
    }
    std::sort(values_.begin(), values_.end());
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t n() const { return values_.size(); }
  const SampleMeta& meta() const { return meta_; }

 private:
  std::vector<double> values_;
  SampleMeta meta_;
};

}  // namespace stablesim
