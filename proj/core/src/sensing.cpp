#include "shiftcam/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "shiftcam/correlator.hpp"
#include "shiftcam/error.hpp"
#include "shiftcam/image_io.hpp"
#include "shiftcam/rng.hpp"

namespace shiftcam {
namespace {

void require_even(std::size_t m, std::size_t n, const char* what) {
  if (m == 0 || n == 0 || m % 2 != 0 || n % 2 != 0)
    fail(ErrorKind::InvalidArgument, std::string(what) + ": dimensions must be even and positive (got " +
                                         std::to_string(m) + "x" + std::to_string(n) + ")");
}

bool is_delta(const Psf* psf) { return psf == nullptr || psf->radius == 0; }

// Sum of the m x n window of `g` anchored at every (p, q), p < m, q < n, by
// a summed-area table. Exact for integer-valued grids.
RealGrid window_sums(const RealGrid& g, std::size_t m, std::size_t n) {
  RealGrid sat(g.rows() + 1, g.cols() + 1);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c)
      sat(r + 1, c + 1) = g(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
  RealGrid out(m, n);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < n; ++q)
      out(p, q) = sat(p + m, q + n) - sat(p, q + n) - sat(p + m, q) + sat(p, q);
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Format, path.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

std::string_view to_string(Architecture arch) noexcept {
  switch (arch) {
    case Architecture::Full: return "full";
    case Architecture::A: return "A";
    case Architecture::B: return "B";
  }
  return "?";
}

std::string_view to_string(Stage stage) noexcept { return stage == Stage::Raw ? "raw" : "converted"; }

std::string_view to_string(SensingMode mode) noexcept { return mode == SensingMode::Raw01 ? "raw01" : "bipolar"; }

std::string_view to_string(BipolarModel model) noexcept {
  return model == BipolarModel::Consistent ? "consistent" : "blurred_bipolar";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "full") return Architecture::Full;
  if (name == "A" || name == "a") return Architecture::A;
  if (name == "B" || name == "b") return Architecture::B;
  fail(ErrorKind::InvalidArgument, "unknown architecture '" + std::string(name) + "' (full|A|B)");
}

Stage parse_stage(std::string_view name) {
  if (name == "raw") return Stage::Raw;
  if (name == "converted") return Stage::Converted;
  fail(ErrorKind::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

BipolarModel parse_bipolar_model(std::string_view name) {
  if (name == "consistent") return BipolarModel::Consistent;
  if (name == "blurred_bipolar") return BipolarModel::BlurredBipolar;
  fail(ErrorKind::InvalidArgument, "unknown bipolar model '" + std::string(name) + "'");
}

std::size_t measurement_count(Architecture arch, std::size_t m, std::size_t n) {
  if (arch == Architecture::Full) return m * n;
  require_even(m, n, "measurement_count");
  return m * n / 4;
}

std::size_t readings_per_measurement(Architecture arch) noexcept { return arch == Architecture::B ? 4 : 1; }

// ---------------------------------------------------------------------------
// ModulatorPattern

RealGrid ModulatorPattern::as_real() const {
  RealGrid out(grid.rows(), grid.cols());
  std::transform(grid.storage().begin(), grid.storage().end(), out.storage().begin(),
                 [](std::uint8_t v) { return static_cast<double>(v); });
  return out;
}

double ModulatorPattern::base_sum() const noexcept {
  double acc = 0.0;
  for (std::size_t r = 0; r < base_rows; ++r)
    for (std::size_t c = 0; c < base_cols; ++c) acc += grid(r, c);
  return acc;
}

double ModulatorPattern::base_density() const noexcept {
  return base_rows * base_cols == 0 ? 0.0 : base_sum() / static_cast<double>(base_rows * base_cols);
}

bool ModulatorPattern::is_tiled() const noexcept {
  if (grid.rows() != 2 * base_rows || grid.cols() != 2 * base_cols) return false;
  for (std::size_t r = 0; r < grid.rows(); ++r)
    for (std::size_t c = 0; c < grid.cols(); ++c)
      if (grid(r, c) != grid(r % base_rows, c % base_cols)) return false;
  return true;
}

ModulatorPattern generate_pattern(std::size_t m, std::size_t n, std::uint64_t seed) {
  require_even(m, n, "generate_pattern");
  ModulatorPattern p;
  p.base_rows = m;
  p.base_cols = n;
  p.seed = seed;
  p.grid = Grid<std::uint8_t>(2 * m, 2 * n);
  Xoshiro256 rng(seed);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const std::uint8_t v = rng.bit() ? 1 : 0;
      p.grid(r, c) = v;
      p.grid(r + m, c) = v;
      p.grid(r, c + n) = v;
      p.grid(r + m, c + n) = v;
    }
  return p;
}

void save_pattern(const ModulatorPattern& pattern, const std::filesystem::path& pgm_path) {
  save_image(pattern.as_real(), pgm_path);
  auto sidecar = pgm_path;
  sidecar.replace_extension(".txt");
  std::ofstream out(sidecar);
  if (!out) fail(ErrorKind::Io, "cannot write " + sidecar.string());
  out << "m=" << pattern.base_rows << "\nn=" << pattern.base_cols << "\nseed=" << pattern.seed
      << "\ntiled=" << (pattern.is_tiled() ? "true" : "false") << "\n";
}

ModulatorPattern load_pattern(const std::filesystem::path& pgm_path) {
  auto sidecar = pgm_path;
  sidecar.replace_extension(".txt");
  const auto kv = read_key_values(sidecar);
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorKind::Format, sidecar.string() + ": missing key '" + key + "'");
    return it->second;
  };
  ModulatorPattern p;
  try {
    p.base_rows = std::stoul(get("m"));
    p.base_cols = std::stoul(get("n"));
    p.seed = std::stoull(get("seed"));
  } catch (const std::logic_error&) {
    fail(ErrorKind::Format, sidecar.string() + ": malformed numeric field");
  }
  const ImagePlane img = load_image(pgm_path);
  if (img.rows() != 2 * p.base_rows || img.cols() != 2 * p.base_cols)
    fail(ErrorKind::Format, pgm_path.string() + ": grid size disagrees with sidecar");
  p.grid = Grid<std::uint8_t>(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.storage()[i];
    if (v != 0.0 && v != 1.0) fail(ErrorKind::Format, pgm_path.string() + ": pattern is not binary");
    p.grid.storage()[i] = v == 1.0 ? 1 : 0;
  }
  if (get("tiled") == "true" && !p.is_tiled())
    fail(ErrorKind::Format, pgm_path.string() + ": sidecar claims tiling but quadrants differ");
  return p;
}

// ---------------------------------------------------------------------------
// SensingOperator

SensingOperator::SensingOperator(RealGrid pattern, std::size_t m, std::size_t n, SensingMode mode,
                                 Architecture arch, std::optional<RealGrid> offset)
    : pattern_(std::move(pattern)), m_(m), n_(n), mode_(mode), arch_(arch), offset_(std::move(offset)) {
  if (pattern_.rows() != 2 * m_ || pattern_.cols() != 2 * n_)
    fail(ErrorKind::InvalidArgument, "SensingOperator: pattern must be (2m x 2n)");
  if (arch_ != Architecture::Full) require_even(m_, n_, "SensingOperator");
  if (offset_ && (offset_->rows() != m_ || offset_->cols() != n_))
    fail(ErrorKind::InvalidArgument, "SensingOperator: offset must be m x n");
  correlator_ = std::make_shared<const Correlator>(pattern_, m_, n_);
}

std::size_t SensingOperator::measurement_count() const noexcept {
  return arch_ == Architecture::Full ? m_ * n_ : m_ * n_ / 4;
}

SensingOperator SensingOperator::with_architecture(Architecture arch) const {
  SensingOperator copy = *this;
  if (arch != Architecture::Full) require_even(m_, n_, "with_architecture");
  copy.arch_ = arch;
  return copy;
}

void SensingOperator::apply_full(std::span<const double> image, std::span<double> out) const {
  require(image.size() == m_ * n_ && out.size() == m_ * n_, "apply_full: size mismatch");
  correlator_->correlate(image, out);
  if (offset_) {
    const double shift = dot(offset_->values(), image);
    for (double& v : out) v -= shift;
  }
}

void SensingOperator::apply_full_adjoint(std::span<const double> readings, std::span<double> out) const {
  require(readings.size() == m_ * n_ && out.size() == m_ * n_, "apply_full_adjoint: size mismatch");
  correlator_->correlate(readings, out);
  if (offset_) {
    double total = 0.0;
    for (double v : readings) total += v;
    const auto w = offset_->values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= total * w[k];
  }
}

void SensingOperator::apply(std::span<const double> image, std::span<double> out) const {
  require(out.size() == measurement_count(), "SensingOperator::apply: output size mismatch");
  if (arch_ == Architecture::Full) {
    apply_full(image, out);
    return;
  }
  std::vector<double> full(m_ * n_);
  apply_full(image, full);
  const std::size_t hn = n_ / 2;
  for (std::size_t i = 0; i < m_ / 2; ++i)
    for (std::size_t j = 0; j < hn; ++j) {
      const std::size_t r = 2 * i, c = 2 * j;
      if (arch_ == Architecture::A) {
        out[i * hn + j] = full[r * n_ + c];
      } else {
        out[i * hn + j] = full[r * n_ + c] + full[r * n_ + c + 1] + full[(r + 1) * n_ + c] + full[(r + 1) * n_ + c + 1];
      }
    }
}

void SensingOperator::apply_adjoint(std::span<const double> measurements, std::span<double> out) const {
  require(measurements.size() == measurement_count(), "SensingOperator::apply_adjoint: size mismatch");
  if (arch_ == Architecture::Full) {
    apply_full_adjoint(measurements, out);
    return;
  }
  std::vector<double> full(m_ * n_, 0.0);
  const std::size_t hn = n_ / 2;
  for (std::size_t i = 0; i < m_ / 2; ++i)
    for (std::size_t j = 0; j < hn; ++j) {
      const std::size_t r = 2 * i, c = 2 * j;
      const double y = measurements[i * hn + j];
      full[r * n_ + c] = y;
      if (arch_ == Architecture::B) {
        full[r * n_ + c + 1] = y;
        full[(r + 1) * n_ + c] = y;
        full[(r + 1) * n_ + c + 1] = y;
      }
    }
  apply_full_adjoint(full, out);
}

SensingOperator make_operator(const ModulatorPattern& pattern, const Psf* psf, SensingMode mode, Architecture arch,
                              const OperatorOptions& options) {
  const std::size_t m = pattern.base_rows;
  const std::size_t n = pattern.base_cols;
  if (psf && (psf->size() > pattern.grid.rows() || psf->size() > pattern.grid.cols()))
    fail(ErrorKind::InvalidArgument, "make_operator: psf larger than pattern");
  const RealGrid binary = pattern.as_real();

  if (mode == SensingMode::Raw01) {
    return SensingOperator(is_delta(psf) ? binary : blur_pattern(binary, *psf), m, n, mode, arch);
  }

  const ITotalSource source =
      options.i_total_source.value_or(arch == Architecture::A ? ITotalSource::External : ITotalSource::InBand);
  if (source == ITotalSource::InBand && arch == Architecture::A)
    fail(ErrorKind::InvalidArgument, "make_operator: architecture A cannot derive I_total in-band");

  RealGrid bipolar = binary;
  for (double& v : bipolar.storage()) v = 2.0 * v - 1.0;
  if (is_delta(psf)) return SensingOperator(std::move(bipolar), m, n, mode, arch);
  if (options.bipolar_model == BipolarModel::BlurredBipolar)
    return SensingOperator(blur_pattern(bipolar, *psf), m, n, mode, arch);

  RealGrid blurred = blur_pattern(binary, *psf);
  RealGrid offset(m, n, 1.0);
  if (source == ITotalSource::InBand) {
    const double open = pattern.base_sum();
    if (open <= 0.0) fail(ErrorKind::InvalidArgument, "make_operator: base quadrant is fully opaque");
    offset = window_sums(blurred, m, n);
    for (double& v : offset.storage()) v /= open;
  }
  for (double& v : blurred.storage()) v *= 2.0;
  return SensingOperator(std::move(blurred), m, n, mode, arch, std::move(offset));
}

// ---------------------------------------------------------------------------
// Measurements

MeasurementSet forward_full(const SensingOperator& op, const ImagePlane& img) {
  if (img.rows() != op.image_rows() || img.cols() != op.image_cols())
    fail(ErrorKind::InvalidArgument, "forward_full: image is " + std::to_string(img.rows()) + "x" +
                                         std::to_string(img.cols()) + ", operator expects " +
                                         std::to_string(op.image_rows()) + "x" + std::to_string(op.image_cols()));
  MeasurementSet out;
  out.values.resize(img.size());
  op.apply_full(img.values(), out.values);
  out.arch = Architecture::Full;
  out.stage = op.mode() == SensingMode::Raw01 ? Stage::Raw : Stage::Converted;
  out.image_rows = img.rows();
  out.image_cols = img.cols();
  return out;
}

ImagePlane adjoint_full(const SensingOperator& op, const MeasurementSet& meas) {
  if (meas.arch != Architecture::Full || meas.values.size() != op.image_rows() * op.image_cols())
    fail(ErrorKind::InvalidArgument, "adjoint_full: expects a full-grid measurement set of m*n readings");
  ImagePlane out(op.image_rows(), op.image_cols());
  op.apply_full_adjoint(meas.values, out.values());
  return out;
}

RealGrid build_explicit_matrix(const SensingOperator& op) {
  const std::size_t m = op.image_rows();
  const std::size_t n = op.image_cols();
  if (m * n > kExplicitMatrixLimit)
    fail(ErrorKind::InvalidArgument, "build_explicit_matrix: m*n = " + std::to_string(m * n) + " exceeds " +
                                         std::to_string(kExplicitMatrixLimit));
  const RealGrid& pat = op.pattern();
  RealGrid matrix(m * n, m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto row = matrix.row(i * n + j);
      for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < n; ++q) {
          double v = pat(i + p, j + q);
          if (op.offset()) v -= (*op.offset())(p, q);
          row[p * n + q] = v;
        }
    }
  return matrix;
}

MeasurementSet downsample_A(const MeasurementSet& full) {
  if (full.arch != Architecture::Full) fail(ErrorKind::InvalidArgument, "downsample_A: input must be full-grid");
  const std::size_t m = full.image_rows, n = full.image_cols;
  require_even(m, n, "downsample_A");
  require(full.values.size() == m * n, "downsample_A: reading count mismatch");
  MeasurementSet out = full;
  out.arch = Architecture::A;
  out.values.clear();
  out.values.reserve(m * n / 4);
  for (std::size_t i = 0; i < m; i += 2)
    for (std::size_t j = 0; j < n; j += 2) out.values.push_back(full.values[i * n + j]);
  return out;
}

MeasurementSet downsample_B(const MeasurementSet& full) {
  if (full.arch != Architecture::Full) fail(ErrorKind::InvalidArgument, "downsample_B: input must be full-grid");
  const std::size_t m = full.image_rows, n = full.image_cols;
  require_even(m, n, "downsample_B");
  require(full.values.size() == m * n, "downsample_B: reading count mismatch");
  MeasurementSet out = full;
  out.arch = Architecture::B;
  out.values.clear();
  out.values.reserve(m * n / 4);
  const auto& d = full.values;
  for (std::size_t i = 0; i < m; i += 2)
    for (std::size_t j = 0; j < n; j += 2)
      out.values.push_back(d[i * n + j] + d[(i + 1) * n + j] + d[i * n + j + 1] + d[(i + 1) * n + j + 1]);
  return out;
}

MeasurementSet downsample(const MeasurementSet& full, Architecture arch) {
  switch (arch) {
    case Architecture::Full: return full;
    case Architecture::A: return downsample_A(full);
    case Architecture::B: return downsample_B(full);
  }
  return full;
}

double i_total_in_band(const MeasurementSet& raw, const ModulatorPattern& pattern) {
  if (raw.arch == Architecture::A)
    fail(ErrorKind::InvalidArgument,
         "architecture A discards readings; I_total needs a separate all-open acquisition");
  if (raw.stage != Stage::Raw) fail(ErrorKind::InvalidArgument, "i_total_in_band: readings must be raw");
  if (!pattern.is_tiled()) fail(ErrorKind::InvalidArgument, "i_total_in_band: pattern is not quadrant-tiled");
  if (raw.image_rows != pattern.base_rows || raw.image_cols != pattern.base_cols)
    fail(ErrorKind::InvalidArgument, "i_total_in_band: pattern and readings disagree on dimensions");
  const double open = pattern.base_sum();
  if (open <= 0.0) fail(ErrorKind::InvalidArgument, "i_total_in_band: base quadrant is fully opaque");
  double total = 0.0;
  for (double v : raw.values) total += v;
  return total / open;
}

double i_total_from_B(const MeasurementSet& raw_b, const ModulatorPattern& pattern) {
  if (raw_b.arch != Architecture::B) fail(ErrorKind::InvalidArgument, "i_total_from_B: readings must be architecture B");
  return i_total_in_band(raw_b, pattern);
}

MeasurementSet convert_measurements(const MeasurementSet& raw, double i_total) {
  if (raw.stage != Stage::Raw) fail(ErrorKind::InvalidArgument, "convert_measurements: readings already converted");
  if (!(i_total >= 0.0) || !std::isfinite(i_total))
    fail(ErrorKind::InvalidArgument, "convert_measurements: I_total must be finite and nonnegative");
  MeasurementSet out = raw;
  const double offset = static_cast<double>(readings_per_measurement(raw.arch)) * i_total;
  for (double& v : out.values) v = 2.0 * v - offset;
  out.stage = Stage::Converted;
  out.i_total = i_total;
  return out;
}

}  // namespace shiftcam
