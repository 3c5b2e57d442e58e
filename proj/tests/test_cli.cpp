// Exercises the installed command-line binary end to end. The test runner
// passes the binary path as argv[1]; remaining arguments go to the framework.
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_cli;

int run_cli(const std::string& args, const std::string& log_name = "cli.log") {
  const std::string command = g_cli + " " + args + " >" + log_name + " 2>&1";
  const int status = std::system(command.c_str());
  if (status < 0) return -1;
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

json load_report(const fs::path& dir) {
  return json::parse(slurp(dir / "report.json"));
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::path("cli_scratch") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string str() const { return dir.string(); }
};

}  // namespace

TEST_CASE("simulate writes samples and a report and exits zero") {
  Scratch out("simulate");
  const int rc = run_cli("simulate --alpha 1.0 --n 256,1024 --replicas 50 --seed 42"
                         " --output " + out.str());
  CHECK(rc == 0);

  const std::string csv = slurp(out.dir / "samples_256.csv");
  CHECK(csv.rfind("replica,total,part_S,part_M,part_L\n", 0) == 0);
  // Header plus one line per replica.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
  CHECK(fs::exists(out.dir / "samples_1024.csv"));

  const json report = load_report(out.dir);
  CHECK(report.contains("command"));
  CHECK(report["command"] == "simulate");
  CHECK(report.contains("config"));
  CHECK(report.contains("certificates"));
  CHECK(report["certificates"].contains("tail"));
  REQUIRE(report["results"].is_array());
  REQUIRE(report["results"].size() == 2);
  CHECK(report["results"][0]["n"] == 256);
  CHECK(report["results"][0]["sample_file"] == "samples_256.csv");
  CHECK(report["results"][0].contains("sigma_n_alpha"));
  CHECK(report["results"][0].contains("ranges"));
  CHECK(report["config"]["alpha"] == 1.0);
  CHECK(report["config"]["master_seed"] == 42);
  // Worker count never reaches the artifacts.
  CHECK_FALSE(report["config"].contains("workers"));
}

TEST_CASE("identical configurations reproduce byte-identical artifacts") {
  Scratch out("repro");
  const std::string args = "simulate --alpha 1.0 --n 256 --replicas 80 --seed 7"
                           " --output " + out.str();
  REQUIRE(run_cli(args) == 0);
  const std::string csv_first = slurp(out.dir / "samples_256.csv");
  const std::string report_first = slurp(out.dir / "report.json");

  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(out.dir / "samples_256.csv") == csv_first);
  CHECK(slurp(out.dir / "report.json") == report_first);
}

TEST_CASE("worker fan-out leaves every artifact byte-identical") {
  Scratch out("workers");
  const std::string base = "simulate --alpha 1.0 --n 256 --replicas 80 --seed 7"
                           " --output " + out.str();
  REQUIRE(run_cli(base + " --workers 1") == 0);
  const std::string csv_one = slurp(out.dir / "samples_256.csv");
  const std::string report_one = slurp(out.dir / "report.json");

  REQUIRE(run_cli(base + " --workers 4") == 0);
  CHECK(slurp(out.dir / "samples_256.csv") == csv_one);
  CHECK(slurp(out.dir / "report.json") == report_one);
}

TEST_CASE("draw budgets are refused up front with exit code two") {
  Scratch out("budget");
  const int rc = run_cli("simulate --alpha 1.0 --n 65536 --replicas 10000"
                         " --budget 1000 --output " + out.str());
  CHECK(rc == 2);
  CHECK_FALSE(fs::exists(out.dir / "report.json"));
}

TEST_CASE("invalid parameters exit with the construction code") {
  Scratch out("badalpha");
  CHECK(run_cli("simulate --alpha 2.5 --n 256 --replicas 5 --output " + out.str()) == 3);
  CHECK(run_cli("simulate --alpha 1.0 --n 256 --replicas 0 --output " + out.str()) == 3);
  // A tower alphabet of one value cannot represent the law.
  CHECK(run_cli("tower --alpha 1.0 --alphabet-cap 1 --output " + out.str()) == 3);
}

TEST_CASE("config files parse with line-precise errors") {
  Scratch out("config");
  {
    std::ofstream cfg(out.dir / "good.cfg");
    cfg << "# comment line\n"
        << "alpha = 0.5\n"
        << "n_grid = 256\n"
        << "replicas = 30\n"
        << "master_seed = 9\n"
        << "output_dir = " << out.str() << "\n";
  }
  CHECK(run_cli("simulate --config " + (out.dir / "good.cfg").string()) == 0);
  CHECK(load_report(out.dir)["config"]["alpha"] == 0.5);

  {
    std::ofstream cfg(out.dir / "bad.cfg");
    cfg << "alpha = 1.0\n"
        << "not_a_key = 3\n";
  }
  const int rc = run_cli("simulate --config " + (out.dir / "bad.cfg").string(),
                         "bad_config.log");
  CHECK(rc == 3);
  const std::string log = slurp("bad_config.log");
  CHECK(log.find("bad.cfg:2") != std::string::npos);
  CHECK(log.find("not_a_key") != std::string::npos);
}

TEST_CASE("command-line flags override config file entries") {
  Scratch out("override");
  {
    std::ofstream cfg(out.dir / "base.cfg");
    cfg << "alpha = 0.5\n"
        << "n_grid = 256\n"
        << "replicas = 30\n"
        << "output_dir = " << out.str() << "\n";
  }
  REQUIRE(run_cli("simulate --config " + (out.dir / "base.cfg").string() +
                  " --alpha 1.0 --replicas 40") == 0);
  const json report = load_report(out.dir);
  CHECK(report["config"]["alpha"] == 1.0);
  CHECK(report["config"]["replicas"] == 40);
  // Values not overridden keep their file settings.
  CHECK(report["config"]["n_grid"][0] == 256);
}

TEST_CASE("gof emits quantile and characteristic-function tables") {
  Scratch out("gof");
  const int rc = run_cli("gof --alpha 1.0 --n 256 --replicas 400 --seed 42"
                         " --output " + out.str());
  CHECK(rc == 0);
  const std::string qq = slurp(out.dir / "qq_256.csv");
  CHECK(qq.rfind("p,q_reference,q_empirical\n", 0) == 0);
  CHECK(std::count(qq.begin(), qq.end(), '\n') == 100);  // header + 99 levels
  const std::string ecf = slurp(out.dir / "ecf_256.csv");
  CHECK(ecf.rfind("theta,modulus,reference_modulus\n", 0) == 0);
  const json report = load_report(out.dir);
  REQUIRE(report["results"].is_array());
  CHECK(report["results"][0].contains("ks"));
  CHECK(report["results"][0].contains("threshold"));
  CHECK(report["results"][0]["sample_count"] == 400);
}

TEST_CASE("bounds verdict suite passes on a small grid") {
  Scratch out("bounds");
  const int rc = run_cli("bounds --alpha 1.0 --n 256,512,1024 --replicas 200"
                         " --seed 42 --output " + out.str());
  CHECK(rc == 0);
  const json report = load_report(out.dir);
  CHECK(report["pass"] == true);
  CHECK(report["certificates"].contains("tail"));
  CHECK(report["certificates"].contains("truncated_variance"));
  REQUIRE(report["verdicts"].is_array());
  CHECK(report["verdicts"].size() >= 12);
  for (const auto& verdict : report["verdicts"]) {
    CHECK(verdict["pass"] == true);
  }
}

TEST_CASE("armed negative control is caught and fails the run") {
  Scratch out("negctl");
  const int rc = run_cli("bounds --alpha 1.0 --n 256,512,1024 --replicas 200"
                         " --seed 42 --negative-control --output " + out.str());
  CHECK(rc == 1);
  const json report = load_report(out.dir);
  CHECK(report["pass"] == false);
  bool found = false;
  for (const auto& verdict : report["verdicts"]) {
    if (verdict["name"] == "negative_control_violation") {
      found = true;
      CHECK(verdict["pass"] == false);
      CHECK(verdict["detected"] == true);
    } else {
      CHECK(verdict["pass"] == true);
    }
  }
  CHECK(found);
}

TEST_CASE("tower run validates and compares against its oracle") {
  Scratch out("tower");
  const int rc = run_cli("tower --alpha 1.0 --seed 42 --validation-samples 2000"
                         " --orbits 400 --oracle-replicas 1500 --output " + out.str());
  CHECK(rc == 0);
  const json report = load_report(out.dir);
  CHECK(report["pass"] == true);
  CHECK(report["validation"]["pass"] == true);
  CHECK(report["ks_orbit_vs_oracle"].get<double>() <= 0.10);
  CHECK(report["orbits"]["accepted"] == 400);
  CHECK(report["system"]["heights"][6] == 1093);
  const std::string csv = slurp(out.dir / "orbit_sums.csv");
  CHECK(csv.rfind("orbit,level,scaled_sum\n", 0) == 0);
}

TEST_CASE("missing or unknown subcommands fail") {
  CHECK(run_cli("") != 0);
  CHECK(run_cli("frobnicate") != 0);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <cli-binary> [doctest args]\n", argv[0]);
    return 64;
  }
  g_cli = argv[1];
  doctest::Context context(argc - 1, argv + 1);
  return context.run();
}
