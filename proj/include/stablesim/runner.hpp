#pragma once

// Run configuration, grid studies, and the four command entry points shared
// by the command-line tool and the acceptance harness. Every command is a
// pure function of (config, master_seed): artifacts are byte-identical across
// reruns and worker counts.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablesim/gof.hpp"
#include "stablesim/sim.hpp"
#include "stablesim/stable.hpp"

namespace stablesim {

// Configuration problems: unreadable or malformed files (reported with line
// and key) and semantically invalid values. Surfaces as exit code 3.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  double alpha = 1.0;
  std::vector<std::uint64_t> n_grid = {256, 4096, 65536};
  std::uint32_t replicas = 10000;
  Variant variant = Variant::Z;
  SmallMode mode = SmallMode::coupled;
  std::uint64_t master_seed = 42;
  double epsilon_tail = 1e-3;
  std::uint64_t budget_draws = std::uint64_t(1) << 36;
  std::string output_dir = ".";
  unsigned workers = 1;  // execution width only; never part of the artifacts
  double ks_multiples = 1.5;
  std::vector<double> theta_grid = {0.0, 0.1, 0.2, 0.5, 1.0};

  std::uint32_t tower_stages = 6;
  std::uint32_t tower_k_max = 3;
  std::uint32_t tower_alphabet_cap = 9;
  std::uint64_t tower_prob_denominator = 4096;
  std::uint32_t tower_orbits = 1000;
  std::uint64_t tower_orbit_n = 128;
  std::uint64_t tower_validation_samples = 100000;
  std::uint32_t tower_validation_levels = 2;
  std::uint32_t tower_oracle_replicas = 4000;

  bool negative_control = false;  // inject one off-grid value into the checks
};

// Flat key=value file; '#' starts a comment; unknown keys are errors naming
// the line and key. Values parse with full round-trip precision.
RunConfig load_config(const std::string& path);

// Applies "key=value" override strings (the CLI flag layer); flags win.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

void validate_config(const RunConfig& config);

// Resolved config as JSON, excluding execution width (workers), so artifacts
// do not depend on how the work was spread.
std::string config_json(const RunConfig& config);

// One grid point of the decomposition study: everything the trend and
// invariant verdicts need, measured from a single replica set.
struct StudyPoint {
  std::uint64_t n = 0;
  ScaleRanges ranges;
  double sigma_n_alpha = 0.0;   // NaN when the medium range is empty
  double sigma_limit_alpha = 0.0;
  double scale_factor = 0.0;    // n^{-1/alpha}
  std::uint32_t replicas = 0;

  double ks_medium_x = 0.0;     // scaled medium X sum vs SaS(sigma_n)
  double ks_medium_z = 0.0;     // scaled medium Z sum vs SaS(sigma_n)
  double ks_se = 0.0;           // conservative Monte Carlo envelope 0.5/sqrt(R)

  double max_mid_zy_gap = 0.0;  // max over replicas of |medium(Z) - medium(Y)|
  double gap_allowed = 0.0;     // (1/alpha) log2 n
  std::uint64_t quantizer_violations = 0;
  std::uint64_t assembly_mismatches = 0;  // total or v-split identity misses

  double large_nonzero_fraction = 0.0;  // some large-range entry hit its window
  double large_nonzero_se = 0.0;        // binomial SE
  double large_remainder_beyond_cap = 0.0;
  double union_bound = 0.0;             // analytic mass of window hits past k_mid

  double v_under_second_moment = 0.0;   // of the scaled below-window medium sum
  double v_under_se = 0.0;

  std::uint64_t draws_estimate = 0;
};

StudyPoint run_study_point(double alpha, std::uint64_t n, std::uint32_t replicas,
                           std::uint64_t master_seed, double epsilon_tail,
                           std::uint64_t budget_draws, unsigned workers,
                           const TailBoundCert& cert, RangeMask mask = {});

// Command entry points. Return the process exit code: 0 pass, 1 verdict
// failure, 2 budget refusal, 3 construction or configuration error.
int cmd_simulate(const RunConfig& config);
int cmd_bounds(const RunConfig& config);
int cmd_tower(const RunConfig& config);
int cmd_gof(const RunConfig& config);

// Maps an exception thrown by a command body to the exit-code contract and
// prints the reason to stderr.
int run_command(const RunConfig& config, int (*command)(const RunConfig&));

}  // namespace stablesim
