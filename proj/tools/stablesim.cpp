// Command-line front end: four verbs (simulate, bounds, tower, gof) over a
// flat key=value config file with flag overrides; flags win.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "stablesim/runner.hpp"

namespace {

struct SubSpec {
  CLI::App* cmd = nullptr;
  int (*fn)(const stablesim::RunConfig&) = nullptr;
  std::string config_path;
  // Overrides in command-line order; funneled through the config parser so
  // flags and file entries share one validation path.
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_key_flag(CLI::App* cmd, SubSpec& sub, const std::string& flag,
                  const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&sub, key](const std::string& v) { sub.overrides.emplace_back(key, v); },
      help);
}

void add_common_flags(CLI::App* cmd, SubSpec& sub) {
  cmd->add_option("--config", sub.config_path, "flat key=value config file");
  add_key_flag(cmd, sub, "--alpha", "alpha", "stability index in (0,2)");
  add_key_flag(cmd, sub, "--n,--n_grid", "n_grid", "comma-separated partial-sum lengths");
  add_key_flag(cmd, sub, "--replicas", "replicas", "Monte Carlo replicas per n");
  add_key_flag(cmd, sub, "--variant", "variant", "X (raw), Y (truncated), or Z (quantized)");
  add_key_flag(cmd, sub, "--mode", "mode", "small-range mode: g_only or coupled");
  add_key_flag(cmd, sub, "--seed,--master_seed", "master_seed", "master seed");
  add_key_flag(cmd, sub, "--epsilon-tail,--epsilon_tail", "epsilon_tail",
               "neglected large-scale mass bound");
  add_key_flag(cmd, sub, "--budget,--budget_draws", "budget_draws",
               "maximum keyed draws before refusal");
  add_key_flag(cmd, sub, "--output,--output_dir", "output_dir", "artifact directory");
  add_key_flag(cmd, sub, "--workers", "workers", "worker threads (artifacts unchanged)");
  add_key_flag(cmd, sub, "--ks-multiples,--ks_multiples", "ks_multiples",
               "KS threshold as a multiple of 1.36/sqrt(n)");
  add_key_flag(cmd, sub, "--theta-grid,--theta_grid", "theta_grid",
               "comma-separated ecf evaluation points");
  cmd->add_flag_callback(
      "--negative-control,--negative_control",
      [&sub] { sub.overrides.emplace_back("negative_control", "true"); },
      "inject one off-grid value into the bound checks (self-test)");
  add_key_flag(cmd, sub, "--tower-stages,--tower_stages", "tower_stages",
               "cutting-and-stacking stages");
  add_key_flag(cmd, sub, "--tower-k-max,--tower_k_max", "tower_k_max",
               "largest embedded scale index");
  add_key_flag(cmd, sub, "--alphabet-cap,--tower_alphabet_cap", "tower_alphabet_cap",
               "coarsened alphabet size cap");
  add_key_flag(cmd, sub, "--prob-denominator,--tower_prob_denominator",
               "tower_prob_denominator", "dyadic pmf denominator");
  add_key_flag(cmd, sub, "--orbits,--tower_orbits", "tower_orbits",
               "accepted orbit count");
  add_key_flag(cmd, sub, "--orbit-n,--tower_orbit_n", "tower_orbit_n",
               "orbit partial-sum length");
  add_key_flag(cmd, sub, "--validation-samples,--tower_validation_samples",
               "tower_validation_samples", "base points for marginal checks");
  add_key_flag(cmd, sub, "--validation-levels,--tower_validation_levels",
               "tower_validation_levels", "levels in the validation window");
  add_key_flag(cmd, sub, "--oracle-replicas,--tower_oracle_replicas",
               "tower_oracle_replicas", "i.i.d. oracle sample size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scale-decomposed partial sums of keyed heavy-tailed arrays"};
  app.require_subcommand(1);

  SubSpec subs[4];
  subs[0].cmd = app.add_subcommand("simulate", "sample the decomposed partial sums");
  subs[0].fn = stablesim::cmd_simulate;
  subs[1].cmd = app.add_subcommand("bounds", "run the analytic-bound verdict suite");
  subs[1].fn = stablesim::cmd_bounds;
  subs[2].cmd = app.add_subcommand("tower", "build and validate the rank-one embedding");
  subs[2].fn = stablesim::cmd_tower;
  subs[3].cmd = app.add_subcommand("gof", "goodness-of-fit artifacts for the medium part");
  subs[3].fn = stablesim::cmd_gof;
  for (auto& sub : subs) add_common_flags(sub.cmd, sub);

  CLI11_PARSE(app, argc, argv);

  for (auto& sub : subs) {
    if (!sub.cmd->parsed()) continue;
    stablesim::RunConfig config;
    try {
      if (!sub.config_path.empty()) config = stablesim::load_config(sub.config_path);
      for (const auto& [key, value] : sub.overrides) {
        stablesim::apply_override(config, key, value);
      }
    } catch (const stablesim::config_error& e) {
      std::cerr << "configuration error: " << e.what() << "\n";
      return 3;
    }
    return stablesim::run_command(config, sub.fn);
  }
  return 3;
}
