#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "shiftcam/artifacts.hpp"
#include "shiftcam/cli/app.hpp"
#include "shiftcam/cli/config.hpp"
#include "shiftcam/error.hpp"
#include "shiftcam/image_io.hpp"
#include "temp_dir.hpp"

using namespace shiftcam;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err, env);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string value_of(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  const auto start = pos + key.size() + 1;
  return text.substr(start, text.find('\n', start) - start);
}

const std::vector<std::string> kSmall = {"--experiment.rows", "64", "--experiment.cols", "64"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("cli: psf") {
  testutil::TempDir dir;
  SUBCASE("default kernel") {
    const Outcome o = run({"psf", "-o", dir.path().string()});
    REQUIRE(o.code == 0);
    CHECK(o.out.find("sum=1.000000000000") != std::string::npos);
    CHECK(o.out.find("size=23x23") != std::string::npos);
    CHECK(parse_double(value_of(o.out, "center"), "center") == doctest::Approx(0.161624233501136).epsilon(1e-8));
    const std::string csv = slurp(dir / "psf.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 23);
    CHECK(std::count(csv.begin(), csv.end(), ',') == 23 * 22);
    CHECK(load_image(dir / "psf.png").rows() == 23 * 11);
    CHECK(slurp(dir / "psf_report.txt").find("optics.wavelength=4e-07") != std::string::npos);
  }
  SUBCASE("radius 0 at one micron is a unit delta") {
    const Outcome o = run({"psf", "--radius", "0", "--distance", "1e-6", "-o", dir.path().string()});
    REQUIRE(o.code == 0);
    CHECK(slurp(dir / "psf.csv") == "1\n");
  }
  SUBCASE("no room left to refine the quadrature is a numerical failure") {
    const Outcome o = run({"psf", "--radius", "1", "--optics.oversampling", "32768", "-o", dir.path().string()});
    CHECK(o.code == cli::kExitNumerical);
    CHECK(o.err.find("did not converge") != std::string::npos);
  }
}

TEST_CASE("cli: acquire") {
  testutil::TempDir dir;
  SUBCASE("flat scene, B: readings add up to open pixels times scene sum") {
    const Outcome o = run(with({"acquire", "phantom:flat", "--arch", "B", "--seed", "4", "--sensing.diffraction", "false",
                                "-o", dir.path().string()},
                               kSmall));
    REQUIRE(o.code == 0);
    const MeasurementArtifact a = read_measurements(dir / "measurements.scm");
    const ModulatorPattern p = load_pattern(dir / "measurements_pattern.pgm");
    CHECK(p.seed == 4);
    double total = 0.0;
    for (double v : a.measurements.values) total += v;
    CHECK(total == doctest::Approx(p.base_sum() * 0.5 * 64 * 64).epsilon(1e-12));
    CHECK(a.measurements.values.size() == 1024);
    CHECK_FALSE(a.measurements.i_total.has_value());
  }
  SUBCASE("same seed gives byte-identical files") {
    for (const char* sub : {"r1", "r2"})
      REQUIRE(run(with({"acquire", "phantom:disk", "--seed", "9", "-o", (dir / sub).string()}, kSmall)).code == 0);
    CHECK(slurp(dir / "r1/measurements.scm") == slurp(dir / "r2/measurements.scm"));
    CHECK(slurp(dir / "r1/measurements_pattern.pgm") == slurp(dir / "r2/measurements_pattern.pgm"));
    CHECK(slurp(dir / "r1/measurements_pattern.txt") == slurp(dir / "r2/measurements_pattern.txt"));
  }
  SUBCASE("architecture A at 128x128 records the all-open shot") {
    REQUIRE(run({"acquire", "phantom:disk", "--arch", "A", "--output", (dir / "a.scm").string()}).code == 0);
    const MeasurementArtifact a = read_measurements(dir / "a.scm");
    CHECK(a.measurements.values.size() == 4096);
    REQUIRE(a.measurements.i_total.has_value());
    CHECK(*a.measurements.i_total > 0.0);
    CHECK(a.extra.at("shots") == "2");
  }
  SUBCASE("missing source") {
    CHECK(run({"acquire", (dir / "nope.pgm").string()}).code == cli::kExitConfig);
  }
}

TEST_CASE("cli: reconstruct") {
  testutil::TempDir dir;
  const std::string d = dir.path().string();
  REQUIRE(run(with({"acquire", "phantom:quadrants", "--arch", "B", "--seed", "2", "-o", d}, kSmall)).code == 0);
  const std::string meas = (dir / "measurements.scm").string();

  SUBCASE("round trip on the quadrants phantom") {
    const Outcome o = run(with({"reconstruct", meas, "--reference", "phantom:quadrants", "--trace", (dir / "t.csv").string(),
                                "-o", d},
                               kSmall));
    REQUIRE(o.code == 0);
    CHECK(parse_double(value_of(o.out, "relative_error"), "e") <= 0.05);
    CHECK(std::filesystem::exists(dir / "recon.png"));
    CHECK(slurp(dir / "recon.txt").find("psf_hash=") != std::string::npos);
    CHECK(slurp(dir / "t.csv").rfind("iteration,objective,residual\n", 0) == 0);
  }
  SUBCASE("iteration cap") {
    const Outcome o = run({"reconstruct", meas, "--solver.max_outer_iters", "1", "-o", d});
    REQUIRE(o.code == 0);
    CHECK(value_of(o.out, "iterations") == "1");
    CHECK(std::isfinite(parse_double(value_of(o.out, "final_residual"), "r")));
  }
  SUBCASE("architecture A round trip") {
    REQUIRE(run(with({"acquire", "phantom:disk", "--arch", "A", "--output", (dir / "a.scm").string()}, kSmall)).code == 0);
    const Outcome o = run(with({"reconstruct", (dir / "a.scm").string(), "--reference", "phantom:disk", "-o", d}, kSmall));
    REQUIRE(o.code == 0);
    CHECK(parse_double(value_of(o.out, "relative_error"), "e") <= 0.05);
  }
  SUBCASE("corrupted header is a named error") {
    std::string bytes = slurp(meas);
    bytes.replace(bytes.find("arch=B"), 6, "arch=Q");
    std::ofstream(dir / "bad.scm", std::ios::binary) << bytes;
    const Outcome o = run({"reconstruct", (dir / "bad.scm").string(), "-o", d});
    CHECK(o.code == cli::kExitConfig);
    CHECK(o.err.find("format") != std::string::npos);
    CHECK(o.err.find("arch") != std::string::npos);
  }
  SUBCASE("optics that disagree with the acquisition are refused") {
    const Outcome o = run({"reconstruct", meas, "--optics.propagation_distance", "0.05", "-o", d});
    CHECK(o.code == cli::kExitConfig);
    CHECK(o.err.find("psf hash mismatch") != std::string::npos);
  }
}

TEST_CASE("cli: configuration layers") {
  testutil::TempDir dir;
  const std::string d = dir.path().string();
  REQUIRE(run(with({"acquire", "phantom:disk", "-o", d}, kSmall)).code == 0);
  const std::string meas = (dir / "measurements.scm").string();
  std::ofstream(dir / "cfg.txt") << "# solver settings\nsolver.max_outer_iters = 3\n";
  const std::string cfg = (dir / "cfg.txt").string();
  const std::map<std::string, std::string> env{{"SHIFTCAM_SOLVER__MAX_OUTER_ITERS", "2"}};

  CHECK(value_of(run({"--config", cfg, "reconstruct", meas, "-o", d}).out, "iterations") == "3");
  CHECK(value_of(run({"--config", cfg, "reconstruct", meas, "-o", d}, env).out, "iterations") == "2");
  CHECK(value_of(run({"--config", cfg, "reconstruct", meas, "-o", d, "--solver.max_outer_iters", "1"}, env).out,
                 "iterations") == "1");

  const Outcome verbose = run({"--config", cfg, "-v", "reconstruct", meas, "-o", d}, env);
  CHECK(verbose.err.find("cfg.txt:2: solver.max_outer_iters=3") != std::string::npos);
  CHECK(verbose.err.find("env SHIFTCAM_SOLVER__MAX_OUTER_ITERS: solver.max_outer_iters=2") != std::string::npos);
}

TEST_CASE("cli: unknown keys are errors everywhere") {
  testutil::TempDir dir;
  std::ofstream(dir / "cfg.txt") << "solver.max_outer_iter = 3\n";
  const Outcome file = run({"--config", (dir / "cfg.txt").string(), "psf", "-o", dir.path().string()});
  CHECK(file.code == cli::kExitConfig);
  CHECK(file.err.find("solver.max_outer_iter") != std::string::npos);

  const Outcome env = run({"psf", "-o", dir.path().string()}, {{"SHIFTCAM_OPTICS__WAVELENGHT", "1"}});
  CHECK(env.code == cli::kExitConfig);
  CHECK(env.err.find("optics.wavelenght") != std::string::npos);

  CHECK(run({"psf", "--optics.wavelenght", "1"}).code == cli::kExitConfig);
  CHECK(run({"psf", "--optics.wavelength", "blue"}).code == cli::kExitConfig);
  CHECK(run({"psf", "--optics.wavelength", "-1"}).code == cli::kExitConfig);
  CHECK(run({}).code == cli::kExitConfig);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("cli: config keys") {
  CHECK(cli::env_to_key("SHIFTCAM_SOLVER__MAX_OUTER_ITERS") == "solver.max_outer_iters");
  CHECK(cli::key_to_env("optics.kernel_radius") == "SHIFTCAM_OPTICS__KERNEL_RADIUS");
  for (const cli::ConfigKey& k : cli::config_keys()) {
    CHECK(cli::env_to_key(cli::key_to_env(k.name)) == k.name);
    CHECK_FALSE(k.help.empty());
  }
  // defaults survive a dump/reload cycle
  cli::ConfigBuilder b;
  const std::string dump = cli::dump_config(b.config());
  std::istringstream in(dump);
  std::string line;
  cli::ConfigBuilder c;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.substr(eq + 1).empty()) continue;
    c.set(line.substr(0, eq), line.substr(eq + 1), "dump");
  }
  CHECK(cli::dump_config(c.config()) == dump);
}

TEST_CASE("cli: table") {
  testutil::TempDir dir;
  const std::vector<std::string> base = {"table", "--images", "phantom:quadrants,phantom:disk", "--trials", "2",
                                         "--experiment.rows", "32", "--experiment.cols", "32", "--radius", "3"};
  const Outcome o = run(with(base, {"--check", "--jobs", "2", "-o", (dir / "a").string()}));
  REQUIRE(o.code == 0);
  CHECK(o.out.find("check passed") != std::string::npos);
  CHECK(o.out.find("1.000 (0.000)") != std::string::npos);
  const std::string csv = slurp(dir / "a/table.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 5 * 2);
  const std::string summary = slurp(dir / "a/summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 2 * 5);
  CHECK(std::filesystem::exists(dir / "a/figure.png"));
  CHECK(std::filesystem::exists(dir / "a/figure.txt"));

  REQUIRE(run(with(base, {"--jobs", "1", "-o", (dir / "b").string()})).code == 0);
  CHECK(slurp(dir / "b/table.csv") == csv);

  const Outcome no_half = run(with(base, {"--check", "--experiment.cameras", "classic_full,parallel_B", "-o",
                                          (dir / "c").string()}));
  CHECK(no_half.code == cli::kExitCheckFailed);
}
