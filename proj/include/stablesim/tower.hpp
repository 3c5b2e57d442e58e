#pragma once

// Rank-one cutting-and-stacking systems with exact rational bookkeeping,
// coarsened truncated-quantized laws assigned to tower levels through keyed
// refinement digits, orbit partial sums of the coupled differences, and a
// statistical validation harness comparing level marginals and joint
// indicators against the product law.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stablesim/array.hpp"
#include "stablesim/empirical.hpp"
#include "stablesim/rational.hpp"

namespace stablesim {

// Heights follow h_{m+1} = r_m * h_m + (total spacers at stage m); widths and
// the unstacked reserve are exact rationals. The reserve at every stage is
// 1 - h_m * w_m and never goes negative.
struct RankOneSystem {
  std::vector<std::uint32_t> cut_counts;            // r_m, one per stage
  std::vector<std::vector<std::uint32_t>> spacers;  // r_m spacer counts per stage
  std::vector<std::uint64_t> heights;               // h_0 .. h_M, h_0 = 1
  std::vector<Rational> level_widths;               // w_0 .. w_M
  std::vector<Rational> reserves;                   // reserve after each stage

  std::uint32_t stages() const { return std::uint32_t(heights.size() - 1); }
  std::uint64_t final_height() const { return heights.back(); }
  const Rational& final_width() const { return level_widths.back(); }
  const Rational& final_reserve() const { return reserves.back(); }
};

// cut_counts / spacer_layout of size 1 are repeated across all stages.
// stages = 0 yields the trivial single-level system of width 1.
// Heights are capped at 10^6 levels; beyond that is a range error.
RankOneSystem build_system(std::span<const std::uint32_t> cut_counts,
                           std::span<const std::vector<std::uint32_t>> spacer_layout,
                           std::uint32_t stages);

// Three cuts, spacer layout {0,1,0}: heights 1, 4, 13, 40, 121, ...
RankOneSystem build_chacon(std::uint32_t stages);

// Finite symmetric law on grid letters approximating the conditional law of a
// truncated quantized entry. Weights are numerators over a power-of-two
// denominator and sum exactly to it; letters are ascending and contain 0.
struct CoarseLaw {
  double alpha = 1.0;
  std::uint32_t k = 1;
  std::vector<double> letters;
  std::vector<std::uint64_t> weights;
  std::uint64_t denom = 1;
  double tv_distance = 0.0;  // to the unrounded conditional-cell law
  bool degenerate = false;   // point mass at 0 because the window carries no mass
};

// Splits each side of the truncation window into equal-probability cells,
// snaps cell left endpoints down to the quantizer grid, and rounds cell
// masses to multiples of 1/prob_denominator. alphabet_cap below 3 cannot
// hold {-t, 0, t} and degenerates; positive window mass that rounds to zero
// everywhere is also a degeneracy. prob_denominator must be a power of two
// in [2, 2^32].
CoarseLaw coarsened_z_law(double alpha, std::uint32_t k, std::uint32_t alphabet_cap,
                          std::uint64_t prob_denominator);

struct LabeledTower {
  std::uint32_t k = 0;
  std::uint64_t d_k = 0;
  std::uint32_t stage = 0;       // stage index the labels live on
  std::uint32_t digit_bits = 0;  // log2(law.denom) bits consumed per level
  CoarseLaw law;
  std::vector<std::uint64_t> cumulative;  // prefix sums of weights
};

// Places the law for scale k on the final stage of the system. The stage
// must satisfy h >= 2 d_k so one return of the induced map spans the window;
// otherwise a range error reports the required height.
LabeledTower assign_function(const RankOneSystem& system, std::uint32_t k,
                             const CoarseLaw& law);

// Inverse CDF of the law on the dyadic digit lattice: digit in [0, denom).
double letter_value(const CoarseLaw& law, std::uint64_t digit);

// Keyed digit of `bits` bits for (tower k, level, orbit). Distinct fields
// give disjoint counter blocks, so digits are independent across all four.
std::uint64_t refinement_digit(std::uint64_t master_seed, std::uint32_t orbit,
                               std::uint32_t k, std::uint64_t level, std::uint32_t bits);

// Letter observed at a level of a labeled tower for one orbit.
double tower_letter(const LabeledTower& tower, std::uint64_t master_seed,
                    std::uint32_t orbit, std::uint64_t level);

struct OrbitPoint {
  std::uint32_t orbit_id = 0;
  std::uint64_t level = 0;
  bool in_tower = true;  // false when the draw fell into the unstacked reserve
};

// Uniform start: reserve hit with the exact reserve probability (resolved at
// 64-bit granularity), otherwise a uniform level of the final stage.
OrbitPoint sample_orbit_point(const RankOneSystem& system, std::uint64_t master_seed,
                              std::uint32_t orbit_id);

// Exact dyadic base sub-cell selected by the refinement digits consumed over
// [level_begin, level_end); denominators grow like denom^levels, so only
// short windows stay within 64-bit rationals.
std::pair<Rational, Rational> base_cell(const LabeledTower& tower,
                                        std::uint64_t master_seed, std::uint32_t orbit,
                                        std::uint64_t level_begin, std::uint64_t level_end);

// Sum over j < n of sum over towers of letter(level+j) - letter(level+j+d_k).
// The point must start low enough that every term stays inside the stage;
// otherwise a coverage error carries the uncovered measure.
double orbit_sum(const RankOneSystem& system, std::span<const LabeledTower> towers,
                 const OrbitPoint& point, std::uint64_t n, std::uint64_t master_seed);

struct TowerMarginal {
  std::uint32_t k = 0;
  double chi_square_max = 0.0;  // worst level inside the validation window
  double chi_square_threshold = 0.0;
  std::uint32_t df = 0;
  bool pass = false;
  bool skipped_degenerate = false;
};

struct ValidationReport {
  std::uint64_t samples = 0;
  std::uint32_t levels_checked = 0;
  std::vector<TowerMarginal> marginals;
  double level_pair_corr_z = 0.0;  // max |corr| * sqrt(N) between level pairs
  double cross_tower_corr_z = 0.0; // max |corr| * sqrt(N) between towers
  double corr_threshold = 3.0;
  bool pass = false;
};

// Draws `samples` independent base points, reads the letters of the first
// `levels` levels of every tower, and checks each level marginal against the
// law (chi-square within df + 3*sqrt(2 df)) plus indicator correlations
// between level pairs and across towers (|corr| * sqrt(N) <= 3).
ValidationReport embedding_validation(const RankOneSystem& system,
                                      std::span<const LabeledTower> towers,
                                      std::uint64_t samples, std::uint32_t levels,
                                      std::uint64_t master_seed);

// I.i.d. reference sample for the same coupled sums: letters drawn from the
// coarse laws on a separate key stream, columns shared between the plain and
// shifted position exactly as in the array coupling.
EmpiricalSample coarse_oracle_sample(std::span<const LabeledTower> towers,
                                     std::uint64_t n, std::uint32_t replicas,
                                     std::uint64_t master_seed);

}  // namespace stablesim
