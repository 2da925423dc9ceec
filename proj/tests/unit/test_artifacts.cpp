#include <cmath>
#include <sstream>

#include "doctest.h"
#include "shiftcam/artifacts.hpp"
#include "shiftcam/error.hpp"

using namespace shiftcam;

namespace {

MeasurementArtifact sample() {
  MeasurementArtifact a;
  a.measurements.arch = Architecture::B;
  a.measurements.stage = Stage::Raw;
  a.measurements.image_rows = 4;
  a.measurements.image_cols = 4;
  a.measurements.values = {0.1, -2.5, 1e-300, 3.0};
  a.measurements.i_total = 0.30000000000000004;
  a.pattern_seed = 18446744073709551615ull;
  a.psf_hash = "0123456789abcdef";
  a.extra["source"] = "phantom:disk";
  return a;
}

std::string to_bytes(const MeasurementArtifact& a) {
  std::ostringstream out;
  write_measurements(a, out);
  return out.str();
}

ErrorKind read_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_measurements(in);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a read error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("measurement artifacts round trip bit-exactly") {
  const MeasurementArtifact a = sample();
  const std::string bytes = to_bytes(a);
  std::istringstream in(bytes);
  const MeasurementArtifact b = read_measurements(in);
  CHECK(b.measurements.values == a.measurements.values);
  CHECK(b.measurements.arch == Architecture::B);
  CHECK(b.measurements.stage == Stage::Raw);
  CHECK(b.measurements.image_rows == 4);
  CHECK(*b.measurements.i_total == *a.measurements.i_total);
  CHECK(b.pattern_seed == a.pattern_seed);
  CHECK(b.psf_hash == a.psf_hash);
  CHECK(b.extra.at("source") == "phantom:disk");
  CHECK(to_bytes(b) == bytes);
}

TEST_CASE("payload is little-endian float64 after a blank line") {
  const std::string bytes = to_bytes(sample());
  const auto split = bytes.find("\n\n");
  REQUIRE(split != std::string::npos);
  const std::string payload = bytes.substr(split + 2);
  CHECK(payload.size() == 4 * 8);
  // 3.0 = 0x4008000000000000, last value
  CHECK(static_cast<unsigned char>(payload[31]) == 0x40);
  CHECK(static_cast<unsigned char>(payload[30]) == 0x08);
  CHECK(static_cast<unsigned char>(payload[24]) == 0x00);
  CHECK(bytes.find("count=4\n") != std::string::npos);
}

TEST_CASE("corrupted artifacts are rejected") {
  const std::string good = to_bytes(sample());
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK(read_error(replace("format=shiftcam-measurements", "format=other")) == ErrorKind::Format);
  CHECK(read_error(replace("count=4", "count=5")) == ErrorKind::Format);
  CHECK(read_error(replace("arch=B", "arch=Z")) == ErrorKind::Format);
  CHECK(read_error(replace("rows=4", "rows=four")) == ErrorKind::Format);
  CHECK(read_error(replace("psf_hash=", "psf_hush=")) == ErrorKind::Format);
  CHECK(read_error(replace("version=1", "version=9")) == ErrorKind::Format);
  CHECK(read_error(good.substr(0, good.size() - 3)) == ErrorKind::Format);
  CHECK(read_error(good + "x") == ErrorKind::Format);
  CHECK(read_error("garbage") == ErrorKind::Format);
}

TEST_CASE("number formatting is shortest round-trip") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -0.0, 5e-324}) CHECK(parse_double(format_double(v), "v") == v);
  CHECK(format_double(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("1.0x", "v"), Error);
  CHECK_THROWS_AS(parse_u64("-1", "v"), Error);
  CHECK(parse_u64("42", "v") == 42);
}

TEST_CASE("inconsistent sets are not written") {
  MeasurementArtifact a = sample();
  a.measurements.values.pop_back();
  std::ostringstream out;
  CHECK_THROWS_AS(write_measurements(a, out), Error);
}
