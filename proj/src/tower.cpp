#include "stablesim/tower.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "stablesim/errors.hpp"
#include "stablesim/rng.hpp"

namespace stablesim {

namespace {

constexpr std::uint64_t kMaxHeight = 1000000;

// Neumaier compensated accumulator, matching the one used by the range sums.
struct Kahan {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

std::size_t digit_index(const LabeledTower& tower, std::uint64_t digit) {
  const auto& cum = tower.cumulative;
  const auto it = std::upper_bound(cum.begin(), cum.end(), digit);
  if (it == cum.end()) throw std::logic_error("digit outside the law denominator");
  return std::size_t(it - cum.begin());
}

}  // namespace

RankOneSystem build_system(std::span<const std::uint32_t> cut_counts,
                           std::span<const std::vector<std::uint32_t>> spacer_layout,
                           std::uint32_t stages) {
  if (cut_counts.empty() || spacer_layout.empty()) {
    throw validation_error("build_system needs at least one cut count and one spacer layout");
  }
  if (cut_counts.size() != 1 && cut_counts.size() != stages) {
    throw validation_error("cut_counts must have size 1 or one entry per stage");
  }
  if (spacer_layout.size() != 1 && spacer_layout.size() != stages) {
    throw validation_error("spacer_layout must have size 1 or one entry per stage");
  }

  RankOneSystem sys;
  sys.heights.push_back(1);

  std::vector<std::uint64_t> stage_spacers;  // total spacers per stage
  for (std::uint32_t m = 0; m < stages; ++m) {
    const std::uint32_t r = cut_counts[cut_counts.size() == 1 ? 0 : m];
    const auto& layout = spacer_layout[spacer_layout.size() == 1 ? 0 : m];
    if (r < 2) throw validation_error("cut count must be at least 2");
    if (layout.size() != r) {
      throw validation_error("spacer layout must list one spacer count per cut copy");
    }
    std::uint64_t s = 0;
    for (const std::uint32_t c : layout) s += c;
    sys.cut_counts.push_back(r);
    sys.spacers.push_back(layout);
    stage_spacers.push_back(s);
    const std::uint64_t h = sys.heights.back();
    const std::uint64_t next = std::uint64_t(r) * h + s;
    if (next > kMaxHeight) {
      throw std::range_error("tower height " + std::to_string(next) + " exceeds the cap of " +
                             std::to_string(kMaxHeight) + " levels");
    }
    sys.heights.push_back(next);
  }

  // Base width from repeating the final stage forever: the leftover reserve
  // funds spacer mass s*w_M*(1/r + 1/r^2 + ...) = s*w_M/(r-1), so
  // w_M * ((r-1) h_M + s) = r - 1 exactly.
  Rational w_final;
  if (stages == 0) {
    w_final = Rational(1);
  } else {
    const std::uint32_t r = sys.cut_counts.back();
    const std::uint64_t s = stage_spacers.back();
    const std::uint64_t h = sys.heights.back();
    w_final = Rational(std::int64_t(r) - 1,
                       (std::int64_t(r) - 1) * std::int64_t(h) + std::int64_t(s));
  }

  sys.level_widths.assign(stages + 1, w_final);
  for (std::uint32_t m = stages; m-- > 0;) {
    sys.level_widths[m] = sys.level_widths[m + 1] * Rational(sys.cut_counts[m]);
  }

  sys.reserves.reserve(stages + 1);
  for (std::uint32_t m = 0; m <= stages; ++m) {
    const Rational used = Rational(std::int64_t(sys.heights[m])) * sys.level_widths[m];
    const Rational reserve = Rational(1) - used;
    if (reserve < Rational(0)) {
      throw validation_error("spacer layout exhausts the reserve at stage " + std::to_string(m));
    }
    sys.reserves.push_back(reserve);
  }

  // Mass conservation at every stage transition: the new tower holds exactly
  // the old tower plus the spacers taken from the reserve.
  for (std::uint32_t m = 0; m + 1 <= stages; ++m) {
    const Rational lhs = sys.reserves[m + 1];
    const Rational rhs =
        sys.reserves[m] - Rational(std::int64_t(stage_spacers[m])) * sys.level_widths[m + 1];
    if (lhs != rhs) throw std::logic_error("reserve bookkeeping mismatch");
  }
  return sys;
}

RankOneSystem build_chacon(std::uint32_t stages) {
  const std::uint32_t cuts[] = {3};
  const std::vector<std::uint32_t> layout[] = {{0, 1, 0}};
  return build_system(cuts, layout, stages);
}

CoarseLaw coarsened_z_law(double alpha, std::uint32_t k, std::uint32_t alphabet_cap,
                          std::uint64_t prob_denominator) {
  const AlphaStableParams params = make_params(alpha, std::pow(double(k), -1.0 / alpha));
  if (prob_denominator < 2 || prob_denominator > (std::uint64_t(1) << 32) ||
      (prob_denominator & (prob_denominator - 1)) != 0) {
    throw validation_error("prob_denominator must be a power of two in [2, 2^32]");
  }
  if (alphabet_cap < 3) {
    throw degeneracy_error("alphabet_cap " + std::to_string(alphabet_cap) +
                           " cannot hold a symmetric nonzero letter alongside 0");
  }
  const ArraySpec spec{alpha, 0};
  const RowAddressing row = row_addressing(spec, k);

  CoarseLaw law;
  law.alpha = alpha;
  law.k = k;
  law.denom = prob_denominator;

  const double f_lo = cdf_sas(params, row.window_lo);
  const double f_hi = cdf_sas(params, row.window_hi);
  const double mass = f_hi - f_lo;  // one-sided window mass
  if (!(mass > 0.0)) {
    // The window carries no mass (k = 1 collapses it to a single point).
    law.letters = {0.0};
    law.weights = {prob_denominator};
    law.degenerate = true;
    return law;
  }

  const std::uint32_t m = (alphabet_cap - 1) / 2;
  std::vector<double> pos(m);
  pos[0] = row.window_lo;  // already a grid multiple
  for (std::uint32_t i = 1; i < m; ++i) {
    const double p = f_lo + mass * double(i) / double(m);
    double b = sas_quantile(params, p);
    b = std::min(std::max(b, row.window_lo), row.window_hi);
    pos[i] = quantize_entry_at(row, b);
  }
  for (std::uint32_t i = 1; i < m; ++i) {
    if (!(pos[i] > pos[i - 1])) {
      throw degeneracy_error("equal-mass cells collapsed onto one grid letter; "
                             "lower alphabet_cap or raise k");
    }
  }

  const double cell = mass / double(m);
  std::uint64_t w = std::uint64_t(std::llround(cell * double(prob_denominator)));
  while (w > 0 && 2 * std::uint64_t(m) * w > prob_denominator) --w;
  if (w == 0) {
    throw degeneracy_error("window mass " + std::to_string(mass) +
                           " rounds to zero at denominator " + std::to_string(prob_denominator));
  }

  law.letters.reserve(2 * m + 1);
  law.weights.reserve(2 * m + 1);
  for (std::uint32_t i = m; i-- > 0;) {
    law.letters.push_back(-pos[i]);
    law.weights.push_back(w);
  }
  law.letters.push_back(0.0);
  law.weights.push_back(prob_denominator - 2 * std::uint64_t(m) * w);
  for (std::uint32_t i = 0; i < m; ++i) {
    law.letters.push_back(pos[i]);
    law.weights.push_back(w);
  }

  const double rounded = double(w) / double(prob_denominator);
  const double p0_true = 1.0 - 2.0 * mass;
  const double p0_rounded =
      double(prob_denominator - 2 * std::uint64_t(m) * w) / double(prob_denominator);
  law.tv_distance =
      0.5 * (2.0 * double(m) * std::fabs(rounded - cell) + std::fabs(p0_rounded - p0_true));
  return law;
}

LabeledTower assign_function(const RankOneSystem& system, std::uint32_t k,
                             const CoarseLaw& law) {
  if (law.k != k) throw validation_error("law was built for a different scale index");
  const ArraySpec spec{law.alpha, 0};
  const std::uint64_t d = row_length(spec, k);
  const std::uint64_t h = system.final_height();
  if (h < 2 * d) {
    throw std::range_error("final stage height " + std::to_string(h) +
                           " is below the required 2*d = " + std::to_string(2 * d) +
                           "; add stages");
  }
  LabeledTower tower;
  tower.k = k;
  tower.d_k = d;
  tower.stage = system.stages();
  tower.law = law;
  tower.digit_bits = std::uint32_t(std::countr_zero(law.denom));
  tower.cumulative.reserve(law.weights.size());
  std::uint64_t acc = 0;
  for (const std::uint64_t wi : law.weights) {
    acc += wi;
    tower.cumulative.push_back(acc);
  }
  if (acc != law.denom) throw std::logic_error("law weights do not sum to the denominator");
  return tower;
}

double letter_value(const CoarseLaw& law, std::uint64_t digit) {
  if (digit >= law.denom) throw validation_error("digit outside [0, denom)");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < law.weights.size(); ++i) {
    acc += law.weights[i];
    if (digit < acc) return law.letters[i];
  }
  throw std::logic_error("law weights do not cover the digit lattice");
}

std::uint64_t refinement_digit(std::uint64_t master_seed, std::uint32_t orbit,
                               std::uint32_t k, std::uint64_t level, std::uint32_t bits) {
  if (bits == 0 || bits > 63) throw validation_error("digit width must be in [1, 63]");
  RandomKey key;
  key.master_seed = master_seed;
  key.k = k;
  key.j = level;
  key.replica = orbit;
  key.tag = StreamTag::tower_digit;
  key.draw = 0;
  return random_bits(key)[0] >> (64 - bits);
}

double tower_letter(const LabeledTower& tower, std::uint64_t master_seed,
                    std::uint32_t orbit, std::uint64_t level) {
  const std::uint64_t digit = refinement_digit(master_seed, orbit, tower.k, level,
                                               tower.digit_bits);
  return tower.law.letters[digit_index(tower, digit)];
}

OrbitPoint sample_orbit_point(const RankOneSystem& system, std::uint64_t master_seed,
                              std::uint32_t orbit_id) {
  OrbitPoint point;
  point.orbit_id = orbit_id;

  RandomKey key;
  key.master_seed = master_seed;
  key.k = 0;
  key.j = 0;
  key.replica = orbit_id;
  key.tag = StreamTag::tower_level;
  key.draw = 0;

  // Reserve hit with probability num/den, resolved at 64-bit granularity.
  const Rational& reserve = system.final_reserve();
  const unsigned __int128 threshold =
      ((unsigned __int128)(std::uint64_t(reserve.num())) << 64) /
      (unsigned __int128)(std::uint64_t(reserve.den()));
  const std::uint64_t u0 = random_bits(key)[0];
  if ((unsigned __int128)u0 < threshold) {
    point.in_tower = false;
    point.level = 0;
    return point;
  }

  // Uniform level by rejection below the largest multiple of h.
  const std::uint64_t h = system.final_height();
  const unsigned __int128 span = (unsigned __int128)1 << 64;
  const std::uint64_t limit = std::uint64_t(span - span % h);
  for (std::uint32_t attempt = 1;; ++attempt) {
    key.draw = attempt;
    const std::uint64_t u = random_bits(key)[0];
    if (limit == 0 || u < limit) {  // limit 0 means 2^64 is itself a multiple
      point.level = u % h;
      return point;
    }
    if (attempt > 128) throw std::logic_error("level rejection failed to terminate");
  }
}

std::pair<Rational, Rational> base_cell(const LabeledTower& tower,
                                        std::uint64_t master_seed, std::uint32_t orbit,
                                        std::uint64_t level_begin, std::uint64_t level_end) {
  if (level_end < level_begin) throw std::invalid_argument("empty level window");
  Rational lo(0), hi(1);
  const std::int64_t den = std::int64_t(tower.law.denom);
  for (std::uint64_t level = level_begin; level < level_end; ++level) {
    const std::uint64_t digit = refinement_digit(master_seed, orbit, tower.k, level,
                                                 tower.digit_bits);
    const std::size_t idx = digit_index(tower, digit);
    const std::int64_t c_lo = idx == 0 ? 0 : std::int64_t(tower.cumulative[idx - 1]);
    const std::int64_t c_hi = std::int64_t(tower.cumulative[idx]);
    const Rational width = hi - lo;
    hi = lo + width * Rational(c_hi, den);
    lo = lo + width * Rational(c_lo, den);
  }
  return {lo, hi};
}

double orbit_sum(const RankOneSystem& system, std::span<const LabeledTower> towers,
                 const OrbitPoint& point, std::uint64_t n, std::uint64_t master_seed) {
  if (towers.empty()) throw validation_error("orbit_sum needs at least one labeled tower");
  if (n == 0) throw validation_error("orbit_sum needs n >= 1");
  std::uint64_t max_d = 0;
  for (const auto& t : towers) max_d = std::max(max_d, t.d_k);
  const std::uint64_t h = system.final_height();

  const auto uncovered = [&] {
    const Rational bad_levels =
        Rational(std::int64_t(std::min(n + max_d - 1, h))) * system.final_width();
    return (system.final_reserve() + bad_levels).to_double();
  };
  if (!point.in_tower) {
    throw coverage_error("orbit point fell into the unstacked reserve", uncovered());
  }
  if (point.level + n + max_d > h) {
    throw coverage_error("orbit of length " + std::to_string(n) + " from level " +
                         std::to_string(point.level) + " leaves the final stage",
                         uncovered());
  }

  // Per-tower accumulation so the telescoping ceiling 2 d_k max|letter| can
  // be asserted for every orbit: the middle terms of the coboundary cancel.
  Kahan acc;
  for (const auto& t : towers) {
    Kahan part;
    for (std::uint64_t j = 0; j < n; ++j) {
      part.add(tower_letter(t, master_seed, point.orbit_id, point.level + j));
      part.add(-tower_letter(t, master_seed, point.orbit_id, point.level + j + t.d_k));
    }
    double max_letter = 0.0;
    for (const double v : t.law.letters) max_letter = std::max(max_letter, std::fabs(v));
    const double ceiling = 2.0 * double(t.d_k) * max_letter;
    if (std::fabs(part.value()) > ceiling * (1.0 + 1e-12) + 1e-9) {
      throw std::logic_error("orbit partial sum escaped its telescoping ceiling");
    }
    acc.add(part.value());
  }
  return acc.value();
}

ValidationReport embedding_validation(const RankOneSystem& system,
                                      std::span<const LabeledTower> towers,
                                      std::uint64_t samples, std::uint32_t levels,
                                      std::uint64_t master_seed) {
  if (towers.empty()) throw validation_error("embedding_validation needs towers");
  if (samples < 1000) throw validation_error("embedding_validation needs at least 1000 samples");
  if (levels < 2) throw validation_error("embedding_validation needs at least 2 levels");
  if (levels > system.final_height()) {
    throw validation_error("validation window exceeds the final stage height");
  }

  ValidationReport report;
  report.samples = samples;
  report.levels_checked = levels;

  const double n = double(samples);
  bool all_pass = true;

  // Per-tower letter index observations, kept for the correlation stage.
  // indicator[t][level][s] marks the target letter of tower t at that level.
  std::vector<std::size_t> target(towers.size(), 0);
  std::vector<std::vector<std::vector<bool>>> indicator(towers.size());

  for (std::size_t t = 0; t < towers.size(); ++t) {
    const auto& tower = towers[t];
    TowerMarginal marginal;
    marginal.k = tower.k;

    if (tower.law.degenerate) {
      marginal.skipped_degenerate = true;
      marginal.pass = true;
      report.marginals.push_back(marginal);
      continue;
    }

    // Most probable nonzero letter anchors the joint indicator checks.
    std::size_t best = 0;
    std::uint64_t best_w = 0;
    for (std::size_t i = 0; i < tower.law.letters.size(); ++i) {
      if (tower.law.letters[i] != 0.0 && tower.law.weights[i] > best_w) {
        best = i;
        best_w = tower.law.weights[i];
      }
    }
    target[t] = best;
    indicator[t].assign(levels, std::vector<bool>(samples, false));

    std::vector<std::vector<std::uint64_t>> counts(
        levels, std::vector<std::uint64_t>(tower.law.letters.size(), 0));
    for (std::uint64_t s = 0; s < samples; ++s) {
      for (std::uint32_t level = 0; level < levels; ++level) {
        const std::uint64_t digit = refinement_digit(master_seed, std::uint32_t(s),
                                                     tower.k, level, tower.digit_bits);
        const std::size_t idx = digit_index(tower, digit);
        ++counts[level][idx];
        if (idx == best) indicator[t][level][s] = true;
      }
    }

    std::uint32_t df = 0;
    for (const std::uint64_t wi : tower.law.weights) {
      if (wi > 0) ++df;
    }
    --df;
    marginal.df = df;
    marginal.chi_square_threshold = double(df) + 3.0 * std::sqrt(2.0 * double(df));
    for (std::uint32_t level = 0; level < levels; ++level) {
      double chi = 0.0;
      for (std::size_t i = 0; i < tower.law.weights.size(); ++i) {
        if (tower.law.weights[i] == 0) continue;
        const double expect = n * double(tower.law.weights[i]) / double(tower.law.denom);
        const double diff = double(counts[level][i]) - expect;
        chi += diff * diff / expect;
      }
      marginal.chi_square_max = std::max(marginal.chi_square_max, chi);
    }
    marginal.pass = marginal.chi_square_max <= marginal.chi_square_threshold;
    all_pass = all_pass && marginal.pass;
    report.marginals.push_back(marginal);
  }

  // |corr| * sqrt(N) for indicator pairs. Two level pairs per tower (first
  // and last adjacent pair) and one level-0 pair per tower pair keep the
  // number of 3-sigma statistics small enough for a fixed-seed run.
  const auto corr_z = [&](const std::vector<bool>& x, const std::vector<bool>& y) {
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::uint64_t s = 0; s < samples; ++s) {
      const double xv = x[s] ? 1.0 : 0.0;
      const double yv = y[s] ? 1.0 : 0.0;
      sx += xv;
      sy += yv;
      sxy += xv * yv;
    }
    const double px = sx / n, py = sy / n;
    const double var = px * (1.0 - px) * py * (1.0 - py);
    if (var <= 0.0) return 0.0;
    const double r = (sxy / n - px * py) / std::sqrt(var);
    return std::fabs(r) * std::sqrt(n);
  };

  for (std::size_t t = 0; t < towers.size(); ++t) {
    if (towers[t].law.degenerate) continue;
    report.level_pair_corr_z =
        std::max(report.level_pair_corr_z, corr_z(indicator[t][0], indicator[t][1]));
    if (levels >= 3) {
      report.level_pair_corr_z = std::max(
          report.level_pair_corr_z, corr_z(indicator[t][levels - 2], indicator[t][levels - 1]));
    }
    for (std::size_t u = t + 1; u < towers.size(); ++u) {
      if (towers[u].law.degenerate) continue;
      report.cross_tower_corr_z =
          std::max(report.cross_tower_corr_z, corr_z(indicator[t][0], indicator[u][0]));
    }
  }

  report.pass = all_pass && report.level_pair_corr_z <= report.corr_threshold &&
                report.cross_tower_corr_z <= report.corr_threshold;
  return report;
}

EmpiricalSample coarse_oracle_sample(std::span<const LabeledTower> towers,
                                     std::uint64_t n, std::uint32_t replicas,
                                     std::uint64_t master_seed) {
  if (towers.empty()) throw validation_error("coarse_oracle_sample needs towers");
  if (n == 0 || replicas == 0) throw validation_error("oracle needs n >= 1 and replicas >= 1");

  const auto oracle_letter = [&](const LabeledTower& t, std::uint64_t column,
                                 std::uint32_t replica) {
    RandomKey key;
    key.master_seed = master_seed;
    key.k = t.k;
    key.j = column;
    key.replica = replica;
    key.tag = StreamTag::oracle_entry;
    key.draw = 0;
    const std::uint64_t digit = random_bits(key)[0] >> (64 - t.digit_bits);
    return t.law.letters[digit_index(t, digit)];
  };

  std::vector<double> values;
  values.reserve(replicas);
  for (std::uint32_t rep = 0; rep < replicas; ++rep) {
    Kahan acc;
    for (const auto& t : towers) {
      for (std::uint64_t j = 1; j <= n; ++j) {
        acc.add(oracle_letter(t, j, rep));
        acc.add(-oracle_letter(t, j + t.d_k, rep));
      }
    }
    values.push_back(acc.value());
  }
  SampleMeta meta;
  meta.alpha = towers[0].law.alpha;
  meta.n_sum = n;
  meta.variant = "oracle";
  meta.seed = master_seed;
  return EmpiricalSample(std::move(values), meta);
}

}  // namespace stablesim
