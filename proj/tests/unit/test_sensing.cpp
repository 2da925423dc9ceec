#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"
#include "sensing_oracle.hpp"
#include "shiftcam/correlator.hpp"
#include "shiftcam/error.hpp"
#include "shiftcam/image_io.hpp"
#include "shiftcam/sensing.hpp"
#include "temp_dir.hpp"

using namespace shiftcam;

namespace {

constexpr Architecture kArchs[] = {Architecture::Full, Architecture::A, Architecture::B};

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  return oracle::max_abs_diff(a, b) / std::max(1.0, oracle::max_abs(b));
}

MeasurementSet full_set(std::vector<double> v, std::size_t m, std::size_t n) {
  MeasurementSet s;
  s.values = std::move(v);
  s.image_rows = m;
  s.image_cols = n;
  return s;
}

}  // namespace

TEST_CASE("one-dimensional shift example: 5 image points, 3 detectors") {
  // pattern [1 0 1 0 1 1 0] sliding over image [1 2 3 4 5]
  RealGrid pattern(2, 10);
  const double row[] = {1, 0, 1, 0, 1, 1, 0};
  for (std::size_t j = 0; j < 7; ++j) pattern(0, j) = row[j];
  const Correlator corr(pattern, 1, 5);
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> d(5);
  corr.correlate(x, d);
  CHECK(d[0] == doctest::Approx(9));
  CHECK(d[1] == doctest::Approx(11));
  CHECK(d[2] == doctest::Approx(8));
}

TEST_CASE("architecture A keeps odd-odd detectors, B sums 2x2 blocks") {
  // readings labelled by their 1-based (row, col): 11 12 13 14 / 21 ... / 44
  std::vector<double> v;
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 4; ++j) v.push_back(10.0 * i + j);
  const MeasurementSet full = full_set(v, 4, 4);
  const MeasurementSet a = downsample_A(full);
  CHECK(a.values == std::vector<double>{11, 13, 31, 33});
  CHECK(a.arch == Architecture::A);
  const MeasurementSet b = downsample_B(full);
  CHECK(b.values == std::vector<double>{11 + 12 + 21 + 22, 13 + 14 + 23 + 24, 31 + 32 + 41 + 42, 33 + 34 + 43 + 44});
  CHECK(measurement_count(Architecture::A, 4, 4) == 4);
  CHECK(measurement_count(Architecture::Full, 4, 6) == 24);
  CHECK_THROWS_AS(measurement_count(Architecture::B, 3, 4), Error);
}

TEST_CASE("patterns are tiled, seeded and balanced") {
  const ModulatorPattern p = generate_pattern(32, 48, 99);
  CHECK(p.grid.rows() == 64);
  CHECK(p.grid.cols() == 96);
  CHECK(p.is_tiled());
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 48; ++j) {
      CHECK(p.grid(i, j) == p.grid(i + 32, j));
      CHECK(p.grid(i, j) == p.grid(i, j + 48));
      CHECK(p.grid(i, j) == p.grid(i + 32, j + 48));
    }
  CHECK(generate_pattern(32, 48, 99).grid == p.grid);
  CHECK(generate_pattern(32, 48, 100).grid != p.grid);
  // 1536 fair coins: 5 sigma is about 0.064
  CHECK(std::abs(p.base_density() - 0.5) < 0.064);
  CHECK_THROWS_AS(generate_pattern(3, 4, 1), Error);
}

TEST_CASE("pattern files round trip and are validated") {
  testutil::TempDir dir;
  const ModulatorPattern p = generate_pattern(8, 6, 5);
  save_pattern(p, dir / "p.pgm");
  CHECK(std::filesystem::exists(dir / "p.txt"));
  const ModulatorPattern q = load_pattern(dir / "p.pgm");
  CHECK(q.grid == p.grid);
  CHECK(q.seed == 5);
  CHECK(q.base_rows == 8);

  // break the tiling behind the sidecar's back
  ImagePlane img = load_image(dir / "p.pgm");
  img(0, 0) = 1.0 - img(0, 0);
  save_image(img, dir / "p.pgm");
  CHECK_THROWS_AS(load_pattern(dir / "p.pgm"), Error);
}

TEST_CASE("implicit operator equals the explicit shifted-window matrix") {
  std::mt19937_64 gen(17);
  const Psf blur3 = psf_from_kernel(oracle::random_grid(3, 3, gen));
  for (std::size_t m : {2u, 4u, 8u})
    for (std::size_t n : {2u, 4u}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const ModulatorPattern p = generate_pattern(m, n, seed);
        const RealGrid x = oracle::random_grid(m, n, gen);
        for (const Psf* psf : {static_cast<const Psf*>(nullptr), &blur3})
          for (SensingMode mode : {SensingMode::Raw01, SensingMode::Bipolar})
            for (Architecture arch : kArchs) {
              const bool external = arch == Architecture::A;
              const RealGrid full =
                  oracle::expected_full_matrix(p, psf ? &psf->kernel : nullptr, mode == SensingMode::Bipolar, external);
              const RealGrid expect = oracle::select_rows(full, arch, m, n);
              const SensingOperator op = make_operator(p, psf, mode, arch);
              CAPTURE(m);
              CAPTURE(n);
              CAPTURE(seed);
              CHECK(rel_diff(op.forward(x.values()), oracle::matvec(expect, x.storage())) < 1e-12);
            }
      }
    }
}

TEST_CASE("build_explicit_matrix reproduces the defining matrix") {
  std::mt19937_64 gen(2);
  const ModulatorPattern p = generate_pattern(4, 6, 8);
  const Psf psf = psf_from_kernel(oracle::random_grid(3, 3, gen));
  for (SensingMode mode : {SensingMode::Raw01, SensingMode::Bipolar}) {
    const RealGrid got = build_explicit_matrix(make_operator(p, &psf, mode, Architecture::Full));
    const RealGrid want = oracle::expected_full_matrix(p, &psf.kernel, mode == SensingMode::Bipolar, false);
    REQUIRE(got.same_shape(want));
    CHECK(rel_diff(got.storage(), want.storage()) < 1e-12);
  }
  CHECK_THROWS_AS(build_explicit_matrix(make_operator(generate_pattern(66, 64, 1), nullptr, SensingMode::Raw01,
                                                      Architecture::Full)),
                  Error);
}

TEST_CASE("explicit matrix is left-shifted block Toeplitz") {
  const std::size_t m = 6, n = 4;
  const ModulatorPattern p = generate_pattern(m, n, 21);
  const RealGrid a = build_explicit_matrix(make_operator(p, nullptr, SensingMode::Raw01, Architecture::Full));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t pp = 0; pp < m; ++pp)
        for (std::size_t q = 0; q < n; ++q)
          CHECK(a(i * n + j, pp * n + q) == static_cast<double>(p.grid(i + pp, j + q)));
}

TEST_CASE("every image pixel is sensed equally under tiling") {
  const std::size_t m = 8, n = 6;
  const ModulatorPattern p = generate_pattern(m, n, 3);
  const RealGrid a = build_explicit_matrix(make_operator(p, nullptr, SensingMode::Raw01, Architecture::Full));
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, c);
    CHECK(s == p.base_sum());
  }
  std::mt19937_64 gen(3);
  const RealGrid x = oracle::random_grid(m, n, gen);
  const MeasurementSet raw = forward_full(make_operator(p, nullptr, SensingMode::Raw01, Architecture::Full), x);
  double total = 0.0;
  for (double v : raw.values) total += v;
  CHECK(total == doctest::Approx(p.base_sum() * sum(x)).epsilon(1e-13));
  CHECK(i_total_in_band(raw, p) == doctest::Approx(sum(x)).epsilon(1e-13));
}

TEST_CASE("adjoint inner-product identity") {
  std::mt19937_64 gen(5);
  const Psf psf = psf_from_kernel(oracle::random_grid(5, 5, gen));
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t m = 4 + 2 * static_cast<std::size_t>(trial), n = 10 - static_cast<std::size_t>(trial % 3) * 2;
    const ModulatorPattern p = generate_pattern(m, n, static_cast<std::uint64_t>(trial));
    for (SensingMode mode : {SensingMode::Raw01, SensingMode::Bipolar})
      for (Architecture arch : kArchs) {
        const SensingOperator op = make_operator(p, &psf, mode, arch);
        const RealGrid x = oracle::random_grid(m, n, gen, -1, 1);
        std::vector<double> y(op.measurement_count());
        for (double& v : y) v = std::uniform_real_distribution<double>(-1, 1)(gen);
        const double lhs = dot(op.forward(x.values()), y);
        const double rhs = dot(x.values(), op.adjoint(y));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
      }
  }
}

TEST_CASE("converted measurements equal bipolar measurements") {
  std::mt19937_64 gen(8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModulatorPattern p = generate_pattern(8, 8, seed);
    const RealGrid x = oracle::random_grid(8, 8, gen);
    const MeasurementSet raw = forward_full(make_operator(p, nullptr, SensingMode::Raw01, Architecture::Full), x);
    for (Architecture arch : {Architecture::Full, Architecture::B}) {
      const MeasurementSet r = downsample(raw, arch);
      const MeasurementSet conv = convert_measurements(r, i_total_in_band(r, p));
      CHECK(conv.stage == Stage::Converted);
      const auto direct = make_operator(p, nullptr, SensingMode::Bipolar, arch).forward(x.values());
      CHECK(oracle::max_abs_diff(conv.values, direct) <= 1e-10);
    }
    // A needs the separately measured total
    const MeasurementSet ra = downsample_A(raw);
    CHECK_THROWS_AS(i_total_in_band(ra, p), Error);
    const MeasurementSet conv = convert_measurements(ra, sum(x));
    const auto direct = make_operator(p, nullptr, SensingMode::Bipolar, Architecture::A).forward(x.values());
    CHECK(oracle::max_abs_diff(conv.values, direct) <= 1e-10);
  }
}

TEST_CASE("conversion details") {
  SUBCASE("opaque pattern converts to -I_total") {
    MeasurementSet raw = full_set(std::vector<double>(16, 0.0), 4, 4);
    for (double v : convert_measurements(raw, 2.5).values) CHECK(v == -2.5);
  }
  SUBCASE("B subtracts four totals") {
    MeasurementSet raw = full_set({10.0}, 2, 2);
    raw.arch = Architecture::B;
    CHECK(convert_measurements(raw, 1.0).values[0] == 16.0);
  }
  SUBCASE("stage and value checks") {
    MeasurementSet raw = full_set({1.0, 2.0, 3.0, 4.0}, 2, 2);
    const MeasurementSet c = convert_measurements(raw, 1.0);
    CHECK_THROWS_AS(convert_measurements(c, 1.0), Error);
    CHECK_THROWS_AS(convert_measurements(raw, std::nan("")), Error);
    CHECK_THROWS_AS(i_total_in_band(c, generate_pattern(2, 2, 1)), Error);
    CHECK_THROWS_AS(i_total_from_B(raw, generate_pattern(2, 2, 1)), Error);
  }
  SUBCASE("A cannot build an in-band operator") {
    OperatorOptions o;
    o.i_total_source = ITotalSource::InBand;
    const Psf psf = psf_from_kernel(RealGrid(3, 3, 1.0));
    CHECK_THROWS_AS(make_operator(generate_pattern(4, 4, 1), &psf, SensingMode::Bipolar, Architecture::A, o), Error);
  }
}

TEST_CASE("blurred conversion is consistent with the bipolar operator") {
  // physical: blurred 0/1 acquisition, converted with in-band I_total (B) or
  // the scene total (A); model: make_operator(..., Bipolar, ...)
  std::mt19937_64 gen(12);
  const Psf psf = psf_from_kernel(oracle::random_grid(5, 5, gen));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModulatorPattern p = generate_pattern(10, 8, seed);
    const RealGrid x = oracle::random_grid(10, 8, gen);
    const MeasurementSet raw = forward_full(make_operator(p, &psf, SensingMode::Raw01, Architecture::Full), x);
    const MeasurementSet rb = downsample_B(raw);
    const auto b_model = make_operator(p, &psf, SensingMode::Bipolar, Architecture::B).forward(x.values());
    CHECK(rel_diff(convert_measurements(rb, i_total_from_B(rb, p)).values, b_model) < 1e-12);
    const auto a_model = make_operator(p, &psf, SensingMode::Bipolar, Architecture::A).forward(x.values());
    CHECK(rel_diff(convert_measurements(downsample_A(raw), sum(x)).values, a_model) < 1e-12);
  }
}

TEST_CASE("blurred bipolar pattern is 2 * blurred 0/1 pattern - 1 away from the border") {
  std::mt19937_64 gen(13);
  const Psf psf = psf_from_kernel(oracle::random_grid(5, 5, gen));
  const ModulatorPattern p = generate_pattern(8, 8, 4);
  OperatorOptions o;
  o.bipolar_model = BipolarModel::BlurredBipolar;
  const RealGrid bip = make_operator(p, &psf, SensingMode::Bipolar, Architecture::Full, o).pattern();
  const RealGrid raw = make_operator(p, &psf, SensingMode::Raw01, Architecture::Full).pattern();
  for (std::size_t i = 2; i < 14; ++i)
    for (std::size_t j = 2; j < 14; ++j) CHECK(bip(i, j) == doctest::Approx(2.0 * raw(i, j) - 1.0).epsilon(1e-14));
  CHECK(std::abs(bip(0, 0) - (2.0 * raw(0, 0) - 1.0)) > 1e-3);  // the border is where the models differ
}

TEST_CASE("delta psf leaves raw operator untouched") {
  const ModulatorPattern p = generate_pattern(6, 6, 1);
  const Psf d = delta_psf();
  CHECK(make_operator(p, &d, SensingMode::Raw01, Architecture::B).pattern() ==
        make_operator(p, nullptr, SensingMode::Raw01, Architecture::B).pattern());
}

TEST_CASE("diffraction commutes with the shifted-window sum") {
  // D_diff(i, j) = sum_{a,b} h(a, b) D(i - a, j - b) over the ideal detector
  // grid extended by r on every side (the pattern is zero outside the
  // modulator), and this equals sensing with the blurred pattern. On the
  // detector interior the extension is not needed.
  std::mt19937_64 gen(31);
  const std::size_t m = 12, n = 12;
  for (std::size_t r = 1; r <= 3; ++r) {
    const Psf psf = psf_from_kernel(oracle::random_grid(2 * r + 1, 2 * r + 1, gen));
    const ModulatorPattern p = generate_pattern(m, n, r);
    RealGrid x(m, n);
    for (std::size_t i = r; i < m - r; ++i)
      for (std::size_t j = r; j < n - r; ++j) x(i, j) = std::uniform_real_distribution<double>(0, 1)(gen);

    const long R = static_cast<long>(r);
    const RealGrid pat = oracle::pattern_real(p);
    auto ideal = [&](long s, long t) {  // detector (s, t), possibly outside [0, m)
      double acc = 0.0;
      for (long a = 0; a < static_cast<long>(m); ++a)
        for (long b = 0; b < static_cast<long>(n); ++b) {
          const long u = s + a, v = t + b;
          if (u < 0 || v < 0 || u >= static_cast<long>(2 * m) || v >= static_cast<long>(2 * n)) continue;
          acc += pat(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) * x(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        }
      return acc;
    };
    const auto blurred = make_operator(p, &psf, SensingMode::Raw01, Architecture::Full).forward(x.values());
    const RealGrid d = oracle::shifted_windows(pat, x);
    const RealGrid d_conv = oracle::conv_same(d, psf.kernel);
    for (long i = 0; i < static_cast<long>(m); ++i)
      for (long j = 0; j < static_cast<long>(n); ++j) {
        double acc = 0.0;
        for (long a = -R; a <= R; ++a)
          for (long b = -R; b <= R; ++b) acc += psf.at(a, b) * ideal(i - a, j - b);
        const double model = blurred[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
        CHECK(std::abs(acc - model) <= 1e-10);
        const bool interior = i >= R && j >= R && i < static_cast<long>(m) - R && j < static_cast<long>(n) - R;
        if (interior) CHECK(std::abs(d_conv(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - model) <= 1e-10);
      }
  }
}

TEST_CASE("in-band I_total is exact for interior-supported scenes under blur") {
  std::mt19937_64 gen(41);
  const std::size_t m = 16, n = 16, r = 3;
  const Psf psf = psf_from_kernel(oracle::random_grid(2 * r + 1, 2 * r + 1, gen));
  const ModulatorPattern p = generate_pattern(m, n, 6);
  RealGrid x(m, n);
  for (std::size_t i = r; i < m - r; ++i)
    for (std::size_t j = r; j < n - r; ++j) x(i, j) = std::uniform_real_distribution<double>(0, 1)(gen);
  const MeasurementSet raw = downsample_B(forward_full(make_operator(p, &psf, SensingMode::Raw01, Architecture::Full), x));
  CHECK(std::abs(i_total_from_B(raw, p) - sum(x)) <= 1e-8 * sum(x));
}

TEST_CASE("operators are shareable across threads") {
  const ModulatorPattern p = generate_pattern(32, 32, 2);
  const SensingOperator op = make_operator(p, nullptr, SensingMode::Bipolar, Architecture::B);
  const RealGrid x = make_phantom(PhantomKind::Disk, 32, 32);
  const auto ref = op.forward(x.values());
  std::vector<std::vector<double>> outs(4);
  {
    std::vector<std::jthread> pool;
    for (auto& o : outs) pool.emplace_back([&] { for (int k = 0; k < 20; ++k) o = op.forward(x.values()); });
  }
  for (const auto& o : outs) CHECK(o == ref);
}
