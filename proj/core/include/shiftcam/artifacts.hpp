#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "shiftcam/sensing.hpp"

namespace shiftcam {

/// Measurement file: `key=value` header lines, one blank line, then
/// `count` little-endian float64 values. Header keys are written sorted so
/// the same acquisition always produces the same bytes.
struct MeasurementArtifact {
  MeasurementSet measurements;
  std::uint64_t pattern_seed = 0;
  std::string psf_hash;
  /// Everything else worth recording (optics, source, tool version).
  std::map<std::string, std::string> extra;
};

inline constexpr const char* kMeasurementFormat = "shiftcam-measurements";
inline constexpr int kMeasurementFormatVersion = 1;

void write_measurements(const MeasurementArtifact& artifact, std::ostream& out);
void write_measurements(const MeasurementArtifact& artifact, const std::filesystem::path& path);
/// Throws ErrorKind::Format naming the offending key or length on any
/// malformed, missing or inconsistent field.
MeasurementArtifact read_measurements(std::istream& in);
MeasurementArtifact read_measurements(const std::filesystem::path& path);

/// Shortest text form that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);

}  // namespace shiftcam
