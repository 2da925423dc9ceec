#include "shiftcam/artifacts.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "shiftcam/error.hpp"

namespace shiftcam {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

const std::string& need(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) fail(ErrorKind::Format, "measurement header: missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    fail(ErrorKind::Format, what + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty())
    fail(ErrorKind::Format, what + ": not an unsigned integer: '" + text + "'");
  return v;
}

void write_measurements(const MeasurementArtifact& artifact, std::ostream& out) {
  const MeasurementSet& m = artifact.measurements;
  if (m.values.size() != measurement_count(m.arch, m.image_rows, m.image_cols))
    fail(ErrorKind::InvalidArgument, "write_measurements: value count does not match the architecture");
  std::map<std::string, std::string> header = artifact.extra;
  header["format"] = kMeasurementFormat;
  header["version"] = std::to_string(kMeasurementFormatVersion);
  header["arch"] = std::string(to_string(m.arch));
  header["stage"] = std::string(to_string(m.stage));
  header["rows"] = std::to_string(m.image_rows);
  header["cols"] = std::to_string(m.image_cols);
  header["count"] = std::to_string(m.values.size());
  header["seed"] = std::to_string(artifact.pattern_seed);
  header["psf_hash"] = artifact.psf_hash;
  if (m.i_total) header["i_total"] = format_double(*m.i_total);
  for (const auto& [key, value] : header) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
      fail(ErrorKind::InvalidArgument, "measurement header: unwritable entry '" + key + "'");
    out << key << '=' << value << '\n';
  }
  out << '\n';
  for (double v : m.values) put_le(out, v);
  if (!out) fail(ErrorKind::Io, "measurement artifact: write failed");
}

void write_measurements(const MeasurementArtifact& artifact, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_measurements(artifact, out);
}

MeasurementArtifact read_measurements(std::istream& in) {
  std::map<std::string, std::string> header;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Format, "measurement header: malformed line '" + line + "'");
    if (!header.emplace(line.substr(0, eq), line.substr(eq + 1)).second)
      fail(ErrorKind::Format, "measurement header: duplicate key '" + line.substr(0, eq) + "'");
  }
  if (!terminated) fail(ErrorKind::Format, "measurement header: missing blank line terminator");
  if (need(header, "format") != kMeasurementFormat)
    fail(ErrorKind::Format, "measurement header: format is '" + header["format"] + "'");
  if (parse_u64(need(header, "version"), "version") != kMeasurementFormatVersion)
    fail(ErrorKind::Format, "measurement header: unsupported version " + header["version"]);

  MeasurementArtifact a;
  MeasurementSet& m = a.measurements;
  try {
    m.arch = parse_architecture(need(header, "arch"));
    m.stage = parse_stage(need(header, "stage"));
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("measurement header: ") + e.what());
  }
  m.image_rows = parse_u64(need(header, "rows"), "rows");
  m.image_cols = parse_u64(need(header, "cols"), "cols");
  const std::uint64_t count = parse_u64(need(header, "count"), "count");
  if (m.image_rows == 0 || m.image_cols == 0 || m.image_rows % 2 || m.image_cols % 2)
    fail(ErrorKind::Format, "measurement header: rows/cols must be positive and even");
  if (count != measurement_count(m.arch, m.image_rows, m.image_cols))
    fail(ErrorKind::Format, "measurement header: count " + std::to_string(count) + " does not match arch " +
                                std::string(to_string(m.arch)) + " on " + std::to_string(m.image_rows) + "x" +
                                std::to_string(m.image_cols));
  a.pattern_seed = parse_u64(need(header, "seed"), "seed");
  a.psf_hash = need(header, "psf_hash");
  if (auto it = header.find("i_total"); it != header.end()) {
    m.i_total = parse_double(it->second, "i_total");
    if (!std::isfinite(*m.i_total)) fail(ErrorKind::Format, "measurement header: i_total is not finite");
  }
  for (const char* k : {"format", "version", "arch", "stage", "rows", "cols", "count", "seed", "psf_hash", "i_total"})
    header.erase(k);
  a.extra = std::move(header);

  std::vector<unsigned char> payload(count * 8);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != payload.size())
    fail(ErrorKind::Format, "measurement payload: expected " + std::to_string(count) + " values, file is short");
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Format, "measurement payload: trailing bytes");
  m.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.values[i] = get_le(payload.data() + 8 * i);
    if (!std::isfinite(m.values[i])) fail(ErrorKind::Format, "measurement payload: non-finite value");
  }
  return a;
}

MeasurementArtifact read_measurements(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return read_measurements(in);
}

}  // namespace shiftcam
