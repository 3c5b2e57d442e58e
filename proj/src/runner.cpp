#include "stablesim/runner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "stablesim/errors.hpp"
#include "stablesim/tower.hpp"

namespace stablesim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTowerKsLimit = 0.10;
constexpr double kMediumKsLimit = 0.10;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "': cannot parse '" + value + "' as a real");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw config_error("key '" + key + "': expected true/false, got '" + value + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw config_error("key '" + key + "': empty list element");
    out.push_back(parse(key, item));
  }
  if (out.empty()) throw config_error("key '" + key + "': empty list");
  return out;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return (a > UINT64_MAX - b) ? UINT64_MAX : a + b;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw config_error("write failed for '" + path.string() + "'");
}

// %.17g keeps every double bit-exact for cross-language comparison.
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json cert_json(const TailBoundCert& cert) {
  return json{{"alpha", cert.alpha},
              {"coefficient", cert.coefficient},
              {"asymptote", cert.asymptote},
              {"valid_from_t", cert.valid_from_t},
              {"grid_t", cert.grid_t}};
}

json tv_cert_json(const TruncatedVarianceCert& cert) {
  return json{{"alpha", cert.alpha},
              {"coefficient", cert.coefficient},
              {"asymptote", cert.asymptote},
              {"grid_cutoff", cert.grid_cutoff}};
}

json ranges_json(const ScaleRanges& r) {
  return json{{"k_small_max", r.k_small_max},
              {"k_mid_max", r.k_mid_max},
              {"k_large_cap", r.k_large_cap},
              {"large_tail_bound", r.large_tail_bound},
              {"epsilon_tail", r.epsilon_tail}};
}

// Keyed i.i.d. draws: `copies` independent variates summed per value, so the
// same helper serves the plain, pair, and k-fold convolution checks.
std::vector<double> iid_sums(const AlphaStableParams& p, std::uint64_t seed,
                             std::uint32_t replica, std::size_t count,
                             std::uint32_t copies) {
  std::vector<double> out;
  out.reserve(count);
  RandomKey key;
  key.master_seed = seed;
  key.k = 0;
  key.replica = replica;
  key.tag = StreamTag::generic;
  for (std::size_t i = 0; i < count; ++i) {
    key.j = i;
    double s = 0.0;
    for (std::uint32_t c = 0; c < copies; ++c) {
      key.draw = c;
      s += sample_sas(p, key);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "alpha") {
    config.alpha = parse_double(key, value);
  } else if (key == "n_grid") {
    config.n_grid = parse_list<std::uint64_t>(key, value, parse_u64);
  } else if (key == "replicas") {
    config.replicas = std::uint32_t(parse_u64(key, value));
  } else if (key == "variant") {
    try {
      config.variant = parse_variant(value);
    } catch (const std::exception&) {
      throw config_error("key 'variant': expected X, Y, or Z, got '" + value + "'");
    }
  } else if (key == "mode") {
    try {
      config.mode = parse_mode(value);
    } catch (const std::exception&) {
      throw config_error("key 'mode': expected g_only or coupled, got '" + value + "'");
    }
  } else if (key == "master_seed") {
    config.master_seed = parse_u64(key, value);
  } else if (key == "epsilon_tail") {
    config.epsilon_tail = parse_double(key, value);
  } else if (key == "budget_draws") {
    config.budget_draws = parse_u64(key, value);
  } else if (key == "output_dir") {
    config.output_dir = value;
  } else if (key == "workers") {
    config.workers = unsigned(parse_u64(key, value));
  } else if (key == "ks_multiples") {
    config.ks_multiples = parse_double(key, value);
  } else if (key == "theta_grid") {
    config.theta_grid = parse_list<double>(key, value, parse_double);
  } else if (key == "tower_stages") {
    config.tower_stages = std::uint32_t(parse_u64(key, value));
  } else if (key == "tower_k_max") {
    config.tower_k_max = std::uint32_t(parse_u64(key, value));
  } else if (key == "tower_alphabet_cap") {
    config.tower_alphabet_cap = std::uint32_t(parse_u64(key, value));
  } else if (key == "tower_prob_denominator") {
    config.tower_prob_denominator = parse_u64(key, value);
  } else if (key == "tower_orbits") {
    config.tower_orbits = std::uint32_t(parse_u64(key, value));
  } else if (key == "tower_orbit_n") {
    config.tower_orbit_n = parse_u64(key, value);
  } else if (key == "tower_validation_samples") {
    config.tower_validation_samples = parse_u64(key, value);
  } else if (key == "tower_validation_levels") {
    config.tower_validation_levels = std::uint32_t(parse_u64(key, value));
  } else if (key == "tower_oracle_replicas") {
    config.tower_oracle_replicas = std::uint32_t(parse_u64(key, value));
  } else if (key == "negative_control") {
    config.negative_control = parse_bool(key, value);
  } else {
    throw config_error("unknown key '" + key + "'");
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
    }
    try {
      apply_override(config, key, value);
    } catch (const config_error& e) {
      throw config_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return config;
}

void validate_config(const RunConfig& config) {
  if (!(config.alpha > 0.0) || !(config.alpha < 2.0)) {
    throw config_error("alpha must lie strictly inside (0, 2)");
  }
  if (config.n_grid.empty()) throw config_error("n_grid must be nonempty");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    if (config.n_grid[i] < 2) throw config_error("n_grid entries must be at least 2");
    if (i > 0 && config.n_grid[i] <= config.n_grid[i - 1]) {
      throw config_error("n_grid must be strictly increasing");
    }
  }
  if (config.replicas < 1) throw config_error("replicas must be at least 1");
  if (!(config.epsilon_tail > 0.0)) throw config_error("epsilon_tail must be positive");
  if (config.budget_draws == 0) throw config_error("budget_draws must be positive");
  if (config.output_dir.empty()) throw config_error("output_dir must be nonempty");
  if (config.workers < 1) throw config_error("workers must be at least 1");
  if (!(config.ks_multiples > 0.0)) throw config_error("ks_multiples must be positive");
  if (config.theta_grid.empty()) throw config_error("theta_grid must be nonempty");
  if (config.tower_k_max < 1) throw config_error("tower_k_max must be at least 1");
  if (config.tower_orbits < 1) throw config_error("tower_orbits must be at least 1");
  if (config.tower_orbit_n < 1) throw config_error("tower_orbit_n must be at least 1");
  if (config.tower_oracle_replicas < 1) {
    throw config_error("tower_oracle_replicas must be at least 1");
  }
}

std::string config_json(const RunConfig& config) {
  json j;
  j["alpha"] = config.alpha;
  j["n_grid"] = config.n_grid;
  j["replicas"] = config.replicas;
  j["variant"] = variant_name(config.variant);
  j["mode"] = mode_name(config.mode);
  j["master_seed"] = config.master_seed;
  j["epsilon_tail"] = config.epsilon_tail;
  j["budget_draws"] = config.budget_draws;
  j["output_dir"] = config.output_dir;
  j["ks_multiples"] = config.ks_multiples;
  j["theta_grid"] = config.theta_grid;
  j["tower_stages"] = config.tower_stages;
  j["tower_k_max"] = config.tower_k_max;
  j["tower_alphabet_cap"] = config.tower_alphabet_cap;
  j["tower_prob_denominator"] = config.tower_prob_denominator;
  j["tower_orbits"] = config.tower_orbits;
  j["tower_orbit_n"] = config.tower_orbit_n;
  j["tower_validation_samples"] = config.tower_validation_samples;
  j["tower_validation_levels"] = config.tower_validation_levels;
  j["tower_oracle_replicas"] = config.tower_oracle_replicas;
  j["negative_control"] = config.negative_control;
  return j.dump(2);
}

StudyPoint run_study_point(double alpha, std::uint64_t n, std::uint32_t replicas,
                           std::uint64_t master_seed, double epsilon_tail,
                           std::uint64_t budget_draws, unsigned workers,
                           const TailBoundCert& cert, RangeMask mask) {
  const ArraySpec spec = make_array_spec(alpha, master_seed);
  StudyPoint point;
  point.n = n;
  point.ranges = scale_ranges(alpha, n, epsilon_tail, cert);
  point.sigma_n_alpha = theoretical_sigma_n(alpha, n);
  point.sigma_limit_alpha = limiting_sigma_alpha(alpha);
  point.scale_factor = std::pow(double(n), -1.0 / alpha);
  point.replicas = replicas;
  point.gap_allowed = std::log2(double(n)) / alpha;
  point.draws_estimate = estimate_draws(point.ranges, SmallMode::coupled, replicas, mask);
  point.large_remainder_beyond_cap = point.ranges.large_tail_bound;
  point.union_bound =
      large_remainder(alpha, n, cert.coefficient, point.ranges.k_mid_max);
  point.ks_se = 0.5 / std::sqrt(double(replicas));

  const auto breakdowns = run_replicas(spec, point.ranges, SmallMode::coupled, replicas,
                                       budget_draws, workers, mask);

  std::vector<double> med_x, med_z;
  med_x.reserve(replicas);
  med_z.reserve(replicas);
  std::uint64_t large_hits = 0;
  double sq_sum = 0.0, sq_sq_sum = 0.0;
  for (const auto& b : breakdowns) {
    if (mask.medium) {
      med_x.push_back(point.scale_factor * range_value(b.medium, Variant::X));
      med_z.push_back(point.scale_factor * range_value(b.medium, Variant::Z));
      point.max_mid_zy_gap = std::max(
          point.max_mid_zy_gap, std::fabs(range_value(b.medium, Variant::Z) -
                                          range_value(b.medium, Variant::Y)));
      // Assembly identities, recomputed exactly as the accumulators built them.
      const double x = range_value(b.medium, Variant::X);
      const double y = range_value(b.medium, Variant::Y);
      if (x != y + (b.medium.above + b.medium.below)) ++point.assembly_mismatches;
      const double v = point.scale_factor * b.medium.below;
      sq_sum += v * v;
      sq_sq_sum += (v * v) * (v * v);
    }
    if (mask.large && b.large.any_mid) ++large_hits;
    point.quantizer_violations += b.quantizer_violations;
    const DecomposedSum d = decompose(b, Variant::Z);
    if (d.total != d.part_small + d.part_medium + d.part_large) ++point.assembly_mismatches;
  }

  const double r = double(replicas);
  if (mask.medium) {
    SampleMeta meta{alpha, n, "medium", master_seed};
    const AlphaStableParams ref =
        make_params(alpha, std::pow(point.sigma_n_alpha, 1.0 / alpha));
    point.ks_medium_x = ks_distance(EmpiricalSample(std::move(med_x), meta), ref);
    point.ks_medium_z = ks_distance(EmpiricalSample(std::move(med_z), meta), ref);
    point.v_under_second_moment = sq_sum / r;
    const double var =
        std::max(0.0, sq_sq_sum / r - point.v_under_second_moment * point.v_under_second_moment);
    point.v_under_se = std::sqrt(var / r);
  }
  if (mask.large) {
    point.large_nonzero_fraction = double(large_hits) / r;
    point.large_nonzero_se = std::sqrt(
        point.large_nonzero_fraction * (1.0 - point.large_nonzero_fraction) / r);
  }
  return point;
}

int cmd_simulate(const RunConfig& config) {
  const TailBoundCert cert = calibrate_tail_constant(config.alpha);
  const ArraySpec spec = make_array_spec(config.alpha, config.master_seed);

  // Budget refusal happens up front, before any artifact is written.
  std::vector<ScaleRanges> all_ranges;
  std::uint64_t total_draws = 0;
  for (const std::uint64_t n : config.n_grid) {
    all_ranges.push_back(scale_ranges(config.alpha, n, config.epsilon_tail, cert));
    total_draws = saturating_add(
        total_draws, estimate_draws(all_ranges.back(), config.mode, config.replicas));
  }
  if (total_draws > config.budget_draws) {
    throw budget_error("estimated " + std::to_string(total_draws) +
                           " draws exceed budget_draws " +
                           std::to_string(config.budget_draws),
                       total_draws, config.budget_draws);
  }

  fs::create_directories(config.output_dir);
  json results = json::array();
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    const std::uint64_t n = config.n_grid[i];
    SimulateOptions options;
    options.variant = config.variant;
    options.mode = config.mode;
    options.replicas = config.replicas;
    options.budget_draws = config.budget_draws;
    options.workers = config.workers;
    const SimulateResult res = simulate(spec, all_ranges[i], options);

    const std::string csv_name = "samples_" + std::to_string(n) + ".csv";
    std::string csv = "replica,total,part_S,part_M,part_L\n";
    for (const auto& s : res.sums) {
      csv += std::to_string(s.replica);
      csv += ',';
      csv += fmt17(res.scale_factor * s.total);
      csv += ',';
      csv += fmt17(res.scale_factor * s.part_small);
      csv += ',';
      csv += fmt17(res.scale_factor * s.part_medium);
      csv += ',';
      csv += fmt17(res.scale_factor * s.part_large);
      csv += '\n';
    }
    write_text_file(fs::path(config.output_dir) / csv_name, csv);

    json entry;
    entry["n"] = n;
    entry["ranges"] = ranges_json(res.ranges);
    entry["scale_factor"] = res.scale_factor;
    entry["sigma_n_alpha"] = res.sigma_n_alpha;  // NaN serializes as null
    entry["sigma_limit_alpha"] = res.sigma_limit_alpha;
    entry["large_nonzero_fraction"] = res.large_nonzero_fraction;
    entry["draws_estimate"] =
        estimate_draws(res.ranges, config.mode, config.replicas);
    entry["sample_file"] = csv_name;
    if (std::isfinite(res.sigma_n_alpha)) {
      const AlphaStableParams ref = make_params(
          config.alpha, std::pow(res.sigma_n_alpha, 1.0 / config.alpha));
      entry["ks"] = ks_distance(res.total, ref);
      entry["ks_threshold"] = ks_threshold(config.replicas, config.ks_multiples);
    }
    results.push_back(entry);
  }

  json report;
  report["command"] = "simulate";
  report["config"] = json::parse(config_json(config));
  report["certificates"] = {{"tail", cert_json(cert)}};
  report["results"] = results;
  write_text_file(fs::path(config.output_dir) / "report.json", report.dump(2));
  return 0;
}

int cmd_gof(const RunConfig& config) {
  const TailBoundCert cert = calibrate_tail_constant(config.alpha);
  const ArraySpec spec = make_array_spec(config.alpha, config.master_seed);
  const RangeMask medium_only{false, true, false};

  std::uint64_t total_draws = 0;
  std::vector<ScaleRanges> all_ranges;
  for (const std::uint64_t n : config.n_grid) {
    all_ranges.push_back(scale_ranges(config.alpha, n, config.epsilon_tail, cert));
    total_draws = saturating_add(
        total_draws,
        estimate_draws(all_ranges.back(), config.mode, config.replicas, medium_only));
  }
  if (total_draws > config.budget_draws) {
    throw budget_error("estimated " + std::to_string(total_draws) +
                           " draws exceed budget_draws " +
                           std::to_string(config.budget_draws),
                       total_draws, config.budget_draws);
  }

  fs::create_directories(config.output_dir);
  json results = json::array();
  bool all_pass = true;
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    const std::uint64_t n = config.n_grid[i];
    const double sigma_n_alpha = theoretical_sigma_n(config.alpha, n);
    const AlphaStableParams ref =
        make_params(config.alpha, std::pow(sigma_n_alpha, 1.0 / config.alpha));
    const double factor = std::pow(double(n), -1.0 / config.alpha);

    const auto breakdowns =
        run_replicas(spec, all_ranges[i], config.mode, config.replicas,
                     config.budget_draws, config.workers, medium_only);
    std::vector<double> values;
    values.reserve(breakdowns.size());
    for (const auto& b : breakdowns) {
      values.push_back(factor * range_value(b.medium, config.variant));
    }
    SampleMeta meta{config.alpha, n, variant_name(config.variant), config.master_seed};
    const EmpiricalSample sample(std::move(values), meta);

    const GoFReport gof = make_gof_report(sample, ref, config.ks_multiples);
    all_pass = all_pass && gof.pass;

    const std::string qq_name = "qq_" + std::to_string(n) + ".csv";
    std::string qq_csv = "p,q_reference,q_empirical\n";
    for (const auto& q : gof.qq) {
      qq_csv += fmt17(q.p);
      qq_csv += ',';
      qq_csv += fmt17(q.q_reference);
      qq_csv += ',';
      qq_csv += fmt17(q.q_empirical);
      qq_csv += '\n';
    }
    write_text_file(fs::path(config.output_dir) / qq_name, qq_csv);

    const std::string ecf_name = "ecf_" + std::to_string(n) + ".csv";
    std::string ecf_csv = "theta,modulus,reference_modulus\n";
    for (const auto& [theta, modulus] : ecf_modulus(sample, config.theta_grid)) {
      ecf_csv += fmt17(theta);
      ecf_csv += ',';
      ecf_csv += fmt17(modulus);
      ecf_csv += ',';
      ecf_csv += fmt17(cf_value(ref, theta));
      ecf_csv += '\n';
    }
    write_text_file(fs::path(config.output_dir) / ecf_name, ecf_csv);

    json entry = json::parse(gof_report_json(gof));
    entry["n"] = n;
    entry["sigma_n_alpha"] = sigma_n_alpha;
    entry["qq_file"] = qq_name;
    entry["ecf_file"] = ecf_name;
    results.push_back(entry);
  }

  json report;
  report["command"] = "gof";
  report["config"] = json::parse(config_json(config));
  report["certificates"] = {{"tail", cert_json(cert)}};
  report["results"] = results;
  write_text_file(fs::path(config.output_dir) / "report.json", report.dump(2));
  return all_pass ? 0 : 1;
}

int cmd_bounds(const RunConfig& config) {
  const TailBoundCert cert = calibrate_tail_constant(config.alpha);
  const TruncatedVarianceCert tv_cert = calibrate_truncated_variance_constant(config.alpha);
  const AlphaStableParams unit = make_params(config.alpha, 1.0);

  constexpr std::size_t kMcDraws = 1000000;

  // Budget covers the grid studies plus the direct Monte Carlo checks.
  std::uint64_t total_draws = 11 * std::uint64_t(kMcDraws);
  std::vector<ScaleRanges> all_ranges;
  for (const std::uint64_t n : config.n_grid) {
    all_ranges.push_back(scale_ranges(config.alpha, n, config.epsilon_tail, cert));
    total_draws = saturating_add(
        total_draws,
        estimate_draws(all_ranges.back(), SmallMode::coupled, config.replicas));
  }
  if (total_draws > config.budget_draws) {
    throw budget_error("estimated " + std::to_string(total_draws) +
                           " draws exceed budget_draws " +
                           std::to_string(config.budget_draws),
                       total_draws, config.budget_draws);
  }

  json verdicts = json::array();
  bool all_pass = true;
  const auto add_verdict = [&](const std::string& name, bool pass, json detail) {
    detail["name"] = name;
    detail["pass"] = pass;
    verdicts.push_back(detail);
    all_pass = all_pass && pass;
  };

  // Sampler tails against the certified bound on a dyadic t grid.
  {
    std::vector<double> abs_draws = iid_sums(unit, config.master_seed, 0, kMcDraws, 1);
    for (double& v : abs_draws) v = std::fabs(v);
    std::sort(abs_draws.begin(), abs_draws.end());
    bool pass = true;
    double worst_margin = HUGE_VAL;
    json points = json::array();
    for (std::uint32_t i = 0; i <= 16; ++i) {
      const double t = std::exp2(double(i));
      const auto it = std::lower_bound(abs_draws.begin(), abs_draws.end(), t);
      const double empirical = double(abs_draws.end() - it) / double(kMcDraws);
      const double bound = tail_bound(unit, t, cert);
      const double se = std::sqrt(std::max(empirical, 1e-12) * (1.0 - empirical) /
                                  double(kMcDraws));
      const double margin = bound + 3.0 * se - empirical;
      worst_margin = std::min(worst_margin, margin);
      if (margin < 0.0) pass = false;
      points.push_back({{"t", t}, {"empirical", empirical}, {"bound", bound}, {"se", se}});
    }
    add_verdict("sampler_tail_bound", pass,
                {{"worst_margin", worst_margin}, {"points", points}});
  }

  if (config.alpha == 1.0) {
    const double closed_form = 2.0 / 3.14159265358979323846;
    const double err = std::fabs(cert.coefficient - closed_form);
    add_verdict("tail_constant_closed_form", err <= 1e-6,
                {{"coefficient", cert.coefficient},
                 {"closed_form", closed_form},
                 {"abs_error", err}});
  }

  // Truncated variance against its certified envelope on the K grid.
  {
    bool pass = true;
    double worst_margin = HUGE_VAL;
    for (const double cutoff : tv_cert.grid_cutoff) {
      const double value = truncated_variance(unit, cutoff);
      const double bound = truncated_variance_bound(unit, cutoff, tv_cert);
      const double margin = bound - value + 1e-9 * std::max(1.0, bound);
      worst_margin = std::min(worst_margin, margin);
      if (margin < 0.0) pass = false;
    }
    add_verdict("truncated_variance_bound", pass, {{"worst_margin", worst_margin}});
  }

  // Dispersion estimator: identity, fully dependent pair, 8-fold convolution.
  {
    std::vector<double> thetas;
    for (const double t : config.theta_grid) {
      if (t != 0.0) thetas.push_back(t);
    }
    const std::vector<double> draws = iid_sums(unit, config.master_seed, 1, kMcDraws, 1);
    const double est = dispersion_estimate(draws, config.alpha, thetas);
    add_verdict("dispersion_identity", std::fabs(est - 1.0) <= 0.02,
                {{"estimate", est}, {"target", 1.0}});

    const AlphaStableParams witness = make_params(0.7, 1.0);
    std::vector<double> pair = iid_sums(witness, config.master_seed, 2, kMcDraws, 1);
    for (double& v : pair) v += v;  // fully dependent pair X + X
    const double est_pair = dispersion_estimate(pair, 0.7, thetas);
    const double target_pair = std::exp2(0.7);
    add_verdict("dispersion_dependent_pair",
                est_pair <= 2.0 && std::fabs(est_pair - target_pair) <= 0.05,
                {{"estimate", est_pair},
                 {"target", target_pair},
                 {"iid_value_would_be", 2.0}});

    const std::vector<double> theta_small = {0.02, 0.05, 0.1};
    const std::vector<double> sum8 = iid_sums(witness, config.master_seed, 3, kMcDraws, 8);
    const double est8 = dispersion_estimate(sum8, 0.7, theta_small);
    add_verdict("dispersion_iid_sum8", std::fabs(est8 - 8.0) <= 0.4,
                {{"estimate", est8}, {"target", 8.0}});
  }

  // Grid studies: one replica set per n feeds every trend and invariant.
  std::vector<StudyPoint> studies;
  for (const std::uint64_t n : config.n_grid) {
    studies.push_back(run_study_point(config.alpha, n, config.replicas,
                                      config.master_seed, config.epsilon_tail,
                                      config.budget_draws, config.workers, cert));
  }

  json study_json = json::array();
  for (const auto& s : studies) {
    study_json.push_back({{"n", s.n},
                          {"ranges", ranges_json(s.ranges)},
                          {"sigma_n_alpha", s.sigma_n_alpha},
                          {"sigma_limit_alpha", s.sigma_limit_alpha},
                          {"ks_medium_x", s.ks_medium_x},
                          {"ks_medium_z", s.ks_medium_z},
                          {"ks_se", s.ks_se},
                          {"max_mid_zy_gap", s.max_mid_zy_gap},
                          {"gap_allowed", s.gap_allowed},
                          {"quantizer_violations", s.quantizer_violations},
                          {"assembly_mismatches", s.assembly_mismatches},
                          {"large_nonzero_fraction", s.large_nonzero_fraction},
                          {"large_nonzero_se", s.large_nonzero_se},
                          {"large_remainder_beyond_cap", s.large_remainder_beyond_cap},
                          {"union_bound", s.union_bound},
                          {"v_under_second_moment", s.v_under_second_moment},
                          {"v_under_se", s.v_under_se},
                          {"draws_estimate", s.draws_estimate}});
  }

  if (studies.size() >= 3) {
    std::vector<TrendPoint> gap_trend, ks_trend, large_trend, v_trend;
    for (const auto& s : studies) {
      gap_trend.push_back({double(s.n),
                           std::fabs(s.sigma_n_alpha - s.sigma_limit_alpha), 0.0});
      ks_trend.push_back({double(s.n), s.ks_medium_z, s.ks_se});
      large_trend.push_back({double(s.n),
                             s.large_nonzero_fraction + s.large_remainder_beyond_cap,
                             s.large_nonzero_se});
      v_trend.push_back({double(s.n), s.v_under_second_moment, s.v_under_se});
    }
    const TrendVerdict gap_v = trend_check(gap_trend, TrendExpectation::decreasing);
    add_verdict("dispersion_gap_decreasing", gap_v.pass,
                {{"details", gap_v.details}});

    const TrendVerdict ks_v = trend_check(ks_trend, TrendExpectation::decreasing);
    const bool ks_final = studies.back().ks_medium_z <= kMediumKsLimit;
    add_verdict("medium_z_ks_trend", ks_v.pass && ks_final,
                {{"final_ks", studies.back().ks_medium_z},
                 {"final_limit", kMediumKsLimit},
                 {"details", ks_v.details}});

    const TrendVerdict large_v = trend_check(large_trend, TrendExpectation::decreasing);
    bool large_bound = true;
    for (const auto& s : studies) {
      if (s.large_nonzero_fraction + s.large_remainder_beyond_cap >
          s.union_bound + 3.0 * s.large_nonzero_se) {
        large_bound = false;
      }
    }
    add_verdict("large_part_vanishing", large_v.pass && large_bound,
                {{"details", large_v.details}});

    const TrendVerdict v_v = trend_check(v_trend, TrendExpectation::bounded_by_inverse_log);
    add_verdict("v_under_log_trend", v_v.pass,
                {{"fitted_c", v_v.fitted_c}, {"c_ratio", v_v.c_ratio}});
  }

  {
    bool gap_ok = true, quant_ok = true, assembly_ok = true;
    for (const auto& s : studies) {
      gap_ok = gap_ok && s.max_mid_zy_gap <= s.gap_allowed;
      quant_ok = quant_ok && s.quantizer_violations == 0;
      assembly_ok = assembly_ok && s.assembly_mismatches == 0;
    }
    add_verdict("zy_gap_within_log", gap_ok, json::object());
    add_verdict("quantizer_violations_zero", quant_ok, json::object());
    add_verdict("assembly_identities_exact", assembly_ok, json::object());
  }

  if (config.negative_control) {
    // Self-test hook: push one quantized value off its grid and confirm the
    // membership check reports it. The run fails by design.
    const ArraySpec spec = make_array_spec(config.alpha, config.master_seed);
    const RowAddressing row = row_addressing(spec, 2);
    const double y = truncate_entry_at(row, raw_entry_at(spec, row, 1, false, 0));
    const double bad = quantize_entry_at(row, y) + 0.5 * row.gap_bound;
    const bool detected = bad != quantize_entry_at(row, bad);
    add_verdict("negative_control_violation", false,
                {{"injected_value", bad}, {"detected", detected}});
  }

  fs::create_directories(config.output_dir);
  json report;
  report["command"] = "bounds";
  report["config"] = json::parse(config_json(config));
  report["certificates"] = {{"tail", cert_json(cert)},
                            {"truncated_variance", tv_cert_json(tv_cert)}};
  report["studies"] = study_json;
  report["verdicts"] = verdicts;
  report["pass"] = all_pass;
  write_text_file(fs::path(config.output_dir) / "report.json", report.dump(2));
  return all_pass ? 0 : 1;
}

int cmd_tower(const RunConfig& config) {
  const RankOneSystem system = build_chacon(config.tower_stages);

  std::vector<LabeledTower> towers;
  for (std::uint32_t k = 1; k <= config.tower_k_max; ++k) {
    const CoarseLaw law = coarsened_z_law(config.alpha, k, config.tower_alphabet_cap,
                                          config.tower_prob_denominator);
    towers.push_back(assign_function(system, k, law));
  }

  const ValidationReport validation =
      embedding_validation(system, towers, config.tower_validation_samples,
                           config.tower_validation_levels, config.master_seed);

  // Orbit sums over accepted uniform starts; rejected starts are counted and
  // their measure reported rather than hidden.
  const double factor = std::pow(double(config.tower_orbit_n), -1.0 / config.alpha);
  std::vector<double> orbit_values;
  std::string orbit_csv = "orbit,level,scaled_sum\n";
  std::uint64_t reserve_rejects = 0, coverage_rejects = 0;
  std::uint32_t candidate = 0;
  while (orbit_values.size() < config.tower_orbits) {
    if (candidate > 1000 * config.tower_orbits + 1000) {
      throw coverage_error("orbit rejection rate implausibly high",
                           system.final_reserve().to_double());
    }
    const OrbitPoint point = sample_orbit_point(system, config.master_seed, candidate);
    ++candidate;
    try {
      const double s = orbit_sum(system, towers, point, config.tower_orbit_n,
                                 config.master_seed);
      orbit_values.push_back(factor * s);
      orbit_csv += std::to_string(point.orbit_id);
      orbit_csv += ',';
      orbit_csv += std::to_string(point.level);
      orbit_csv += ',';
      orbit_csv += fmt17(factor * s);
      orbit_csv += '\n';
    } catch (const coverage_error&) {
      if (point.in_tower) {
        ++coverage_rejects;
      } else {
        ++reserve_rejects;
      }
    }
  }
  SampleMeta orbit_meta{config.alpha, config.tower_orbit_n, "orbit", config.master_seed};
  const EmpiricalSample orbit_sample(std::move(orbit_values), orbit_meta);

  const EmpiricalSample oracle_raw =
      coarse_oracle_sample(towers, config.tower_orbit_n, config.tower_oracle_replicas,
                           config.master_seed);
  std::vector<double> oracle_scaled;
  oracle_scaled.reserve(oracle_raw.n());
  for (const double v : oracle_raw.values()) oracle_scaled.push_back(factor * v);
  SampleMeta oracle_meta{config.alpha, config.tower_orbit_n, "oracle", config.master_seed};
  const EmpiricalSample oracle_sample(std::move(oracle_scaled), oracle_meta);

  const double ks = ks_two_sample(orbit_sample, oracle_sample);
  const bool pass = validation.pass && ks <= kTowerKsLimit;

  json system_json;
  system_json["cut_counts"] = system.cut_counts;
  system_json["spacer_layout"] = system.spacers;
  system_json["heights"] = system.heights;
  {
    json widths = json::array(), reserves = json::array();
    for (const auto& w : system.level_widths) widths.push_back({w.num(), w.den()});
    for (const auto& r : system.reserves) reserves.push_back({r.num(), r.den()});
    system_json["level_widths"] = widths;
    system_json["reserves"] = reserves;
  }

  json laws_json = json::array();
  for (const auto& t : towers) {
    laws_json.push_back({{"k", t.k},
                         {"d_k", t.d_k},
                         {"stage", t.stage},
                         {"letters", t.law.letters},
                         {"weights", t.law.weights},
                         {"denom", t.law.denom},
                         {"tv_distance", t.law.tv_distance},
                         {"degenerate", t.law.degenerate}});
  }

  json marginals = json::array();
  for (const auto& m : validation.marginals) {
    marginals.push_back({{"k", m.k},
                         {"chi_square_max", m.chi_square_max},
                         {"chi_square_threshold", m.chi_square_threshold},
                         {"df", m.df},
                         {"pass", m.pass},
                         {"skipped_degenerate", m.skipped_degenerate}});
  }

  const double attempts = double(candidate);
  fs::create_directories(config.output_dir);
  write_text_file(fs::path(config.output_dir) / "orbit_sums.csv", orbit_csv);

  json report;
  report["command"] = "tower";
  report["config"] = json::parse(config_json(config));
  report["system"] = system_json;
  report["laws"] = laws_json;
  report["validation"] = {{"samples", validation.samples},
                          {"levels_checked", validation.levels_checked},
                          {"marginals", marginals},
                          {"level_pair_corr_z", validation.level_pair_corr_z},
                          {"cross_tower_corr_z", validation.cross_tower_corr_z},
                          {"corr_threshold", validation.corr_threshold},
                          {"pass", validation.pass}};
  report["orbits"] = {{"accepted", config.tower_orbits},
                      {"reserve_rejects", reserve_rejects},
                      {"coverage_rejects", coverage_rejects},
                      {"rejected_fraction",
                       double(reserve_rejects + coverage_rejects) / attempts},
                      {"reserve_measure", system.final_reserve().to_double()},
                      {"orbit_file", "orbit_sums.csv"}};
  report["ks_orbit_vs_oracle"] = ks;
  report["ks_limit"] = kTowerKsLimit;
  report["pass"] = pass;
  write_text_file(fs::path(config.output_dir) / "report.json", report.dump(2));
  return pass ? 0 : 1;
}

int run_command(const RunConfig& config, int (*command)(const RunConfig&)) {
  try {
    validate_config(config);
    return command(config);
  } catch (const budget_error& e) {
    std::cerr << "budget refusal: " << e.what() << "\n";
    return 2;
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "construction error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace stablesim
