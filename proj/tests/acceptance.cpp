// Acceptance harness. Prints one pass/fail line per criterion on stdout,
// progress notes on stderr, and exits nonzero if any criterion fails.
// argv[1] names the command-line binary used by the reproducibility check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "stablesim/gof.hpp"
#include "stablesim/rng.hpp"
#include "stablesim/runner.hpp"
#include "stablesim/sim.hpp"
#include "stablesim/stable.hpp"

namespace fs = std::filesystem;
using namespace stablesim;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kSeed = 42;
constexpr double kEpsilonTail = 1e-3;
constexpr std::uint64_t kBudget = std::uint64_t(1) << 36;
constexpr std::uint32_t kReplicas = 10000;
constexpr std::size_t kMcDraws = 1000000;

const std::vector<std::uint64_t> kGrid = {256, 4096, 65536};

int g_failures = 0;

void criterion(int index, bool pass, const std::string& text) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", index, text.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void progress(const std::string& text) {
  std::fprintf(stderr, "... %s\n", text.c_str());
  std::fflush(stderr);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Keyed i.i.d. draws, `copies` variates summed per value. Replica indices
// separate the Monte Carlo streams used by the different criteria.
std::vector<double> keyed_sums(const AlphaStableParams& p, std::uint32_t replica,
                               std::size_t count, std::uint32_t copies) {
  std::vector<double> out;
  out.reserve(count);
  RandomKey key;
  key.master_seed = kSeed;
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

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<unreadable:" + path.string() + ">";
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status < 0) return -1;
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <cli-binary>\n", argv[0]);
    return 64;
  }
  const std::string cli = fs::absolute(argv[1]).string();
  const fs::path scratch = "acceptance_scratch";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  std::map<double, TailBoundCert> certs;
  for (const double a : {0.5, 1.0, 1.5}) certs.emplace(a, calibrate_tail_constant(a));

  // 1. The medium-range sum of raw entries, scaled by n^{-1/alpha}, follows
  //    its stable reference law exactly; KS at 10^4 replicas stays below 1.5x
  //    the 95% Kolmogorov quantile.
  try {
    const RangeMask medium_only{false, true, false};
    bool pass = true;
    std::string detail;
    for (const double a : {0.5, 1.0, 1.5}) {
      progress("criterion 1: medium study alpha=" + fmt(a) + " n=4096");
      const StudyPoint s = run_study_point(a, 4096, kReplicas, kSeed, kEpsilonTail,
                                           kBudget, 1, certs.at(a), medium_only);
      pass = pass && s.ks_medium_x <= 0.02;
      detail += " ks(alpha=" + fmt(a) + ")=" + fmt(s.ks_medium_x);
    }
    criterion(1, pass, "medium-sum law matches its stable reference;" + detail +
                           "; limit 0.02");
  } catch (const std::exception& e) {
    criterion(1, false, std::string("exception: ") + e.what());
  }

  // 2. Deterministic arithmetic: the dispersion of the medium range
  //    approaches its limiting constant and the gap shrinks with n.
  try {
    const double limit = limiting_sigma_alpha(1.0);
    double prev = HUGE_VAL, gap_4096 = HUGE_VAL;
    bool decreasing = true;
    std::string detail;
    for (const std::uint64_t n : kGrid) {
      const double gap = std::fabs(theoretical_sigma_n(1.0, n) - limit);
      if (n == 4096) gap_4096 = gap;
      decreasing = decreasing && gap < prev;
      prev = gap;
      detail += " gap(" + std::to_string(n) + ")=" + fmt(gap);
    }
    criterion(2, gap_4096 <= 0.10 && decreasing,
              "dispersion gap to the limit;" + detail +
                  "; gap(4096) limit 0.10, strictly decreasing");
  } catch (const std::exception& e) {
    criterion(2, false, std::string("exception: ") + e.what());
  }

  // Shared replica grid at alpha=1 feeding criteria 3, 4, 5, and 7.
  std::vector<StudyPoint> studies;
  std::string grid_err;
  try {
    for (const std::uint64_t n : kGrid) {
      progress("criteria 3-5,7: full study n=" + std::to_string(n));
      studies.push_back(run_study_point(1.0, n, kReplicas, kSeed, kEpsilonTail,
                                        kBudget, 1, certs.at(1.0)));
    }
  } catch (const std::exception& e) {
    grid_err = e.what();
  }
  const bool grid_ok = studies.size() == kGrid.size();

  // 3. The coarsened-variant medium sum converges toward the same law:
  //    KS nonincreasing along the grid (3-SE slack) and small at the end.
  if (grid_ok) {
    std::vector<TrendPoint> trend;
    std::string detail;
    for (const auto& s : studies) {
      trend.push_back({double(s.n), s.ks_medium_z, s.ks_se});
      detail += " ks(" + std::to_string(s.n) + ")=" + fmt(s.ks_medium_z);
    }
    const TrendVerdict v = trend_check(trend, TrendExpectation::decreasing);
    const double final_ks = studies.back().ks_medium_z;
    criterion(3, v.pass && final_ks <= 0.10,
              "coarsened-variant fit improves with n;" + detail +
                  "; final limit 0.10, se=" + fmt(studies.back().ks_se));
  } else {
    criterion(3, false, "study grid failed: " + grid_err);
  }

  // 4. Hard per-replica invariants, zero violations allowed.
  if (grid_ok) {
    bool gap_ok = true;
    std::uint64_t quantizer = 0, assembly = 0;
    double worst_gap = 0.0, worst_allowed = HUGE_VAL;
    for (const auto& s : studies) {
      quantizer += s.quantizer_violations;
      assembly += s.assembly_mismatches;
      if (s.max_mid_zy_gap > s.gap_allowed) gap_ok = false;
      worst_gap = std::max(worst_gap, s.max_mid_zy_gap);
      worst_allowed = std::min(worst_allowed, s.gap_allowed);
    }
    criterion(4, gap_ok && quantizer == 0 && assembly == 0,
              "per-replica invariants exact; quantizer violations " +
                  std::to_string(quantizer) + ", assembly mismatches " +
                  std::to_string(assembly) + ", max coarsening gap " +
                  fmt(worst_gap) + " within " + fmt(worst_allowed));
  } else {
    criterion(4, false, "study grid failed: " + grid_err);
  }

  // 5. Large-range activity plus its analytic remainder vanishes along the
  //    grid and never exceeds the union bound.
  if (grid_ok) {
    std::vector<TrendPoint> trend;
    bool within = true;
    std::string detail;
    for (const auto& s : studies) {
      const double active = s.large_nonzero_fraction + s.large_remainder_beyond_cap;
      trend.push_back({double(s.n), active, s.large_nonzero_se});
      within = within && active <= s.union_bound + 3.0 * s.large_nonzero_se;
      detail += " p(" + std::to_string(s.n) + ")=" + fmt(active) + "<=" +
                fmt(s.union_bound);
    }
    const TrendVerdict v = trend_check(trend, TrendExpectation::decreasing);
    criterion(5, v.pass && within,
              "large-range activity vanishes within the union bound;" + detail);
  } else {
    criterion(5, false, "study grid failed: " + grid_err);
  }

  // 6. Analytic certificates against direct Monte Carlo and closed forms.
  try {
    bool pass = true;
    std::string detail;

    double tail_margin = HUGE_VAL;
    std::uint32_t replica = 10;
    for (const double a : {0.5, 1.0, 1.5}) {
      progress("criterion 6: tail Monte Carlo alpha=" + fmt(a));
      const AlphaStableParams unit = make_params(a, 1.0);
      std::vector<double> abs_draws = keyed_sums(unit, replica++, kMcDraws, 1);
      for (double& v : abs_draws) v = std::fabs(v);
      std::sort(abs_draws.begin(), abs_draws.end());
      for (int i = 0; i <= 16; ++i) {
        const double t = std::exp2(double(i));
        const auto it = std::lower_bound(abs_draws.begin(), abs_draws.end(), t);
        const double emp = double(abs_draws.end() - it) / double(kMcDraws);
        const double se =
            std::sqrt(std::max(emp, 1e-12) * (1.0 - emp) / double(kMcDraws));
        tail_margin =
            std::min(tail_margin, tail_bound(unit, t, certs.at(a)) + 3.0 * se - emp);
      }
    }
    pass = pass && tail_margin >= 0.0;
    detail += " tail_margin=" + fmt(tail_margin);

    // Closed form at alpha=1: the calibrated coefficient equals 2/pi and the
    // certified bound majorizes the arctan exceedance on the dyadic grid.
    const double coeff_err = std::fabs(certs.at(1.0).coefficient - 2.0 / kPi);
    bool closed_ok = coeff_err <= 1e-6;
    const AlphaStableParams cauchy = make_params(1.0, 1.0);
    for (int i = 0; i <= 16; ++i) {
      const double t = std::exp2(double(i));
      const double exceed = 1.0 - 2.0 * std::atan(t) / kPi;
      closed_ok = closed_ok && tail_bound(cauchy, t, certs.at(1.0)) + 1e-12 >= exceed;
    }
    pass = pass && closed_ok;
    detail += " cauchy_coeff_err=" + fmt(coeff_err);

    double tv_margin = HUGE_VAL;
    for (const double a : {0.5, 1.0, 1.5}) {
      const TruncatedVarianceCert tv = calibrate_truncated_variance_constant(a);
      const AlphaStableParams unit = make_params(a, 1.0);
      for (const double cutoff : tv.grid_cutoff) {
        const double value = truncated_variance(unit, cutoff);
        const double bound = truncated_variance_bound(unit, cutoff, tv);
        tv_margin = std::min(tv_margin, bound - value + 1e-9 * std::max(1.0, bound));
      }
    }
    pass = pass && tv_margin >= 0.0;
    detail += " tv_margin=" + fmt(tv_margin);

    progress("criterion 6: dispersion estimates");
    const std::vector<double> thetas = {0.1, 0.2, 0.5, 1.0};
    const double est =
        dispersion_estimate(keyed_sums(cauchy, 20, kMcDraws, 1), 1.0, thetas);
    pass = pass && std::fabs(est - 1.0) <= 0.02;
    detail += " dispersion=" + fmt(est);

    const AlphaStableParams witness = make_params(0.7, 1.0);
    std::vector<double> pair = keyed_sums(witness, 21, kMcDraws, 1);
    for (double& v : pair) v += v;  // fully dependent pair X + X
    const double est_pair = dispersion_estimate(pair, 0.7, thetas);
    pass = pass && est_pair <= 2.0 && std::fabs(est_pair - std::exp2(0.7)) <= 0.05;
    detail += " dependent_pair=" + fmt(est_pair) + " (iid value 2)";

    criterion(6, pass, "analytic certificates hold;" + detail);
  } catch (const std::exception& e) {
    criterion(6, false, std::string("exception: ") + e.what());
  }

  // 7. The second moment of the scaled below-window remainder decays like
  //    1/log2(n): the fitted constant is stable within a factor 2.
  if (grid_ok) {
    std::vector<TrendPoint> trend;
    std::string detail;
    for (const auto& s : studies) {
      trend.push_back({double(s.n), s.v_under_second_moment, s.v_under_se});
      detail += " m2(" + std::to_string(s.n) + ")=" + fmt(s.v_under_second_moment);
    }
    const TrendVerdict v =
        trend_check(trend, TrendExpectation::bounded_by_inverse_log);
    criterion(7, v.pass, "below-window variance follows the inverse-log decay;" +
                             detail + "; fitted_c=" + fmt(v.fitted_c) +
                             " spread=" + fmt(v.c_ratio) + " (limit 2)");
  } else {
    criterion(7, false, "study grid failed: " + grid_err);
  }

  // 8. Tower embedding at defaults: marginal validation passes and the
  //    orbit-sum law matches the oracle built from the same coarsened law.
  try {
    progress("criterion 8: tower embedding run");
    RunConfig tower_config;
    tower_config.alpha = 1.0;
    tower_config.master_seed = kSeed;
    tower_config.output_dir = (scratch / "tower").string();
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = cmd_tower(tower_config);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const json report =
        json::parse(slurp(fs::path(tower_config.output_dir) / "report.json"));
    criterion(8, rc == 0 && secs < 60.0,
              "tower embedding reproduces the coarsened law; exit=" +
                  std::to_string(rc) + " ks=" +
                  fmt(report["ks_orbit_vs_oracle"].get<double>()) +
                  " (limit 0.1) validation=" +
                  (report["validation"]["pass"].get<bool>() ? "pass" : "fail") +
                  " runtime=" + fmt(secs) + "s (limit 60)");
  } catch (const std::exception& e) {
    criterion(8, false, std::string("exception: ") + e.what());
  }

  // 9. Reproducibility: one-worker and four-worker CLI runs with the same
  //    seed and output path produce byte-identical artifacts.
  try {
    progress("criterion 9: worker reproducibility via " + cli);
    const fs::path w1 = scratch / "w1", w4 = scratch / "w4";
    fs::create_directories(w1);
    fs::create_directories(w4);
    const std::string args =
        " simulate --alpha 1.0 --n 256,1024 --replicas 200 --seed 42 --output .";
    const int rc1 = shell("cd " + w1.string() + " && " + cli + args +
                          " --workers 1 >cli.log 2>&1");
    const int rc4 = shell("cd " + w4.string() + " && " + cli + args +
                          " --workers 4 >cli.log 2>&1");
    bool pass = rc1 == 0 && rc4 == 0;
    std::string detail = "exit=" + std::to_string(rc1) + "/" + std::to_string(rc4);
    for (const char* name : {"samples_256.csv", "samples_1024.csv", "report.json"}) {
      const bool same = slurp(w1 / name) == slurp(w4 / name);
      pass = pass && same;
      detail += std::string(" ") + name + (same ? "=identical" : "=DIFFERS");
    }
    criterion(9, pass, "artifacts byte-identical across worker counts; " + detail);
  } catch (const std::exception& e) {
    criterion(9, false, std::string("exception: ") + e.what());
  }

  std::printf("acceptance: %d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
