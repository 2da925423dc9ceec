#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "shiftcam/grid.hpp"
#include "shiftcam/linear_operator.hpp"
#include "shiftcam/optics.hpp"

namespace shiftcam {

class Correlator;

/// Detector layouts. Full reads every shift; A keeps detectors whose 1-based
/// row and column are both odd (low fill factor); B sums disjoint 2x2 blocks
/// (detector pixels twice as large).
enum class Architecture { Full, A, B };
enum class Stage { Raw, Converted };
/// Raw01 senses with the physical 0/1 transmittance; Bipolar with the
/// equivalent +-1 pattern the converted measurements correspond to.
enum class SensingMode { Raw01, Bipolar };

/// How a bipolar operator accounts for diffraction.
///  - Consistent: readings are modeled as 2 * (P * h) x - I_total(x), the
///    exact linear model of a converted blurred 0/1 acquisition, including
///    the in-band I_total estimate.
///  - BlurredBipolar: readings are modeled as ((2P - 1) * h) x. Equal to the
///    above away from the modulator border only.
enum class BipolarModel { Consistent, BlurredBipolar };

/// Where I_total comes from: derived from the readings themselves (needs the
/// whole detector grid, i.e. Full or B) or measured by a separate all-open
/// shot (A).
enum class ITotalSource { InBand, External };

std::string_view to_string(Architecture arch) noexcept;
std::string_view to_string(Stage stage) noexcept;
std::string_view to_string(SensingMode mode) noexcept;
std::string_view to_string(BipolarModel model) noexcept;
Architecture parse_architecture(std::string_view name);
Stage parse_stage(std::string_view name);
BipolarModel parse_bipolar_model(std::string_view name);

/// Number of readings produced by an architecture on an m x n image.
std::size_t measurement_count(Architecture arch, std::size_t m, std::size_t n);
/// Full-grid readings folded into one reading (1 for Full and A, 4 for B).
std::size_t readings_per_measurement(Architecture arch) noexcept;

/// (2m x 2n) binary transmittance grid whose four m x n quadrants are equal.
struct ModulatorPattern {
  std::size_t base_rows = 0;
  std::size_t base_cols = 0;
  Grid<std::uint8_t> grid;
  std::uint64_t seed = 0;

  RealGrid as_real() const;
  /// Number of open pixels in the base quadrant.
  double base_sum() const noexcept;
  double base_density() const noexcept;
  bool is_tiled() const noexcept;
};

/// Bernoulli(0.5) base quadrant from xoshiro256**(seed), tiled 2 x 2.
ModulatorPattern generate_pattern(std::size_t m, std::size_t n, std::uint64_t seed);

/// Writes the grid as PGM (0/255) and a sidecar `<stem>.txt` header.
void save_pattern(const ModulatorPattern& pattern, const std::filesystem::path& pgm_path);
ModulatorPattern load_pattern(const std::filesystem::path& pgm_path);

struct MeasurementSet {
  std::vector<double> values;
  Architecture arch = Architecture::Full;
  Stage stage = Stage::Raw;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::optional<double> i_total;
};

/// Shift-based sensing operator: a real (2m x 2n) pattern correlated with the
/// image, optionally minus a rank-one offset
///
///   full(i, j) = sum_{p,q} pattern(i+p, j+q) x(p, q) - <offset, x>
///
/// followed by the architecture's downsampling. Forward and adjoint run on
/// FFTs; build_explicit_matrix() gives the dense equivalent.
class SensingOperator final : public LinearOperator {
 public:
  SensingOperator(RealGrid pattern, std::size_t m, std::size_t n, SensingMode mode, Architecture arch,
                  std::optional<RealGrid> offset = std::nullopt);

  std::size_t image_rows() const noexcept override { return m_; }
  std::size_t image_cols() const noexcept override { return n_; }
  std::size_t measurement_count() const noexcept override;
  void apply(std::span<const double> image, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> measurements, std::span<double> out) const override;

  /// Full detector grid (m*n readings, row-major) before downsampling.
  void apply_full(std::span<const double> image, std::span<double> out) const;
  void apply_full_adjoint(std::span<const double> readings, std::span<double> out) const;

  const RealGrid& pattern() const noexcept { return pattern_; }
  const std::optional<RealGrid>& offset() const noexcept { return offset_; }
  SensingMode mode() const noexcept { return mode_; }
  Architecture architecture() const noexcept { return arch_; }

  /// Same pattern and offset, different detector layout.
  SensingOperator with_architecture(Architecture arch) const;

 private:
  RealGrid pattern_;
  std::size_t m_;
  std::size_t n_;
  SensingMode mode_;
  Architecture arch_;
  std::optional<RealGrid> offset_;
  std::shared_ptr<const Correlator> correlator_;
};

struct OperatorOptions {
  BipolarModel bipolar_model = BipolarModel::Consistent;
  /// Defaults to External for A and InBand otherwise.
  std::optional<ITotalSource> i_total_source;
};

/// Builds the operator for a pattern. Raw01 uses the (blurred) 0/1 pattern.
/// Bipolar maps 0/1 to -1/+1 and accounts for blur per `options`. Without a
/// psf (or with the delta psf) both bipolar models reduce to 2P - 1.
SensingOperator make_operator(const ModulatorPattern& pattern, const Psf* psf, SensingMode mode, Architecture arch,
                              const OperatorOptions& options = {});

/// Full detector grid readings (arch = Full) of an image.
MeasurementSet forward_full(const SensingOperator& op, const ImagePlane& img);
/// Transpose of forward_full.
ImagePlane adjoint_full(const SensingOperator& op, const MeasurementSet& meas);

/// Dense (m*n) x (m*n) matrix of the full operator: the row of detector
/// (i, j) is the window pattern(i..i+m-1, j..j+n-1) in row-major order, minus
/// the offset. Verification only; refuses m*n > 4096.
RealGrid build_explicit_matrix(const SensingOperator& op);
inline constexpr std::size_t kExplicitMatrixLimit = 4096;

MeasurementSet downsample_A(const MeasurementSet& full);
MeasurementSet downsample_B(const MeasurementSet& full);
MeasurementSet downsample(const MeasurementSet& full, Architecture arch);

/// I_total = (sum of all full-grid raw readings) / (open pixels in the base
/// quadrant). Accepts Full or B raw readings (B partitions the full grid).
/// Architecture A discards readings and cannot do this; it throws.
double i_total_in_band(const MeasurementSet& raw, const ModulatorPattern& pattern);
/// i_total_in_band restricted to B, as named in the acquisition protocol.
double i_total_from_B(const MeasurementSet& raw_b, const ModulatorPattern& pattern);

/// D = 2 D_raw - c * I_total with c = readings_per_measurement(arch).
MeasurementSet convert_measurements(const MeasurementSet& raw, double i_total);

}  // namespace shiftcam
