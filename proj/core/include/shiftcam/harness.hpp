#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shiftcam/grid.hpp"
#include "shiftcam/linear_operator.hpp"
#include "shiftcam/optics.hpp"
#include "shiftcam/sensing.hpp"
#include "shiftcam/solver.hpp"

namespace shiftcam {

/// The five simulated cameras, in report order.
enum class Camera { ClassicFull, ClassicHalf, SequentialCi, ParallelA, ParallelB };

inline constexpr Camera kAllCameras[] = {Camera::ClassicFull, Camera::ClassicHalf, Camera::SequentialCi,
                                         Camera::ParallelA, Camera::ParallelB};

std::string_view to_string(Camera camera) noexcept;
Camera parse_camera(std::string_view name);
/// Exposures per image: 1 for classic and B, 2 for A (pattern + all-open
/// shot), one per measurement for the sequential camera.
std::size_t shot_count(Camera camera, std::size_t budget) noexcept;

/// What reconstructions are scored against.
///  - Original: replicate the m x n result up to the source resolution and
///    compare with the source image. The normalizer is the classic m x n
///    camera's error, so classic_full scores exactly 1.
///  - Classic: compare at m x n against the classic m x n image (so
///    classic_full scores 0), normalized by the same constant.
enum class MseReference { Original, Classic };
std::string_view to_string(MseReference ref) noexcept;
MseReference parse_mse_reference(std::string_view name);

struct ExperimentConfig {
  /// Image files, or `phantom:<flat|quadrants|disk>` rendered at
  /// phantom_scale times the target size.
  std::vector<std::string> images;
  std::size_t rows = 128;
  std::size_t cols = 128;
  std::size_t trials = 25;
  std::uint64_t seed_base = 1;
  std::vector<Camera> cameras{std::begin(kAllCameras), std::end(kAllCameras)};
  /// 0 means (rows/2) * (cols/2), the A/B measurement count.
  std::size_t budget = 0;
  std::size_t phantom_scale = 4;
  bool diffraction = true;
  BipolarModel bipolar_model = BipolarModel::Consistent;
  MseReference mse_reference = MseReference::Original;
  bool record_timing = false;  // wall_ms stays empty otherwise, keeping CSVs reproducible
  std::size_t jobs = 1;
  OpticsConfig optics;
  SolverConfig solver;

  void validate() const;
  std::size_t effective_budget() const noexcept { return budget ? budget : (rows / 2) * (cols / 2); }
};

/// Errors below this are treated as zero when normalizing, so flat images
/// do not divide by ~0.
inline constexpr double kMseFloor = 1e-6;

double mse(const ImagePlane& a, const ImagePlane& b);

/// Classic camera: mean over the source pixels covered by each output pixel.
ImagePlane simulate_classic(const ImagePlane& source, std::size_t out_rows, std::size_t out_cols);

/// Sequential single-pixel camera: `budget` i.i.d. +-1 rows over the m x n
/// scene, no diffraction.
struct SequentialAcquisition {
  std::shared_ptr<const DenseBipolarOperator> op;
  std::vector<double> y;
};
SequentialAcquisition simulate_sequential_ci(const ImagePlane& scene, std::size_t budget, std::uint64_t seed);

/// One simulated parallel acquisition, ready for the solver.
struct ParallelAcquisition {
  SensingOperator op;      // bipolar reconstruction operator for the architecture
  MeasurementSet converted;
  double i_total = 0.0;    // value used for the conversion
  double i_total_rel_err = 0.0;
};
/// Raw 0/1 acquisition through the (optionally blurred) pattern, downsampled
/// to `arch`, converted with I_total. B derives I_total in-band; A takes it
/// from a second all-open shot, i.e. the scene's total irradiance.
ParallelAcquisition simulate_parallel(const ImagePlane& scene, const ModulatorPattern& pattern, const Psf* psf,
                                      Architecture arch, BipolarModel model = BipolarModel::Consistent);

struct TrialRow {
  std::string image;
  Camera camera = Camera::ClassicFull;
  std::size_t trial = 0;
  std::uint64_t seed = 0;  // 0 for the seedless classic cameras
  double normalized_mse = 0.0;
  double mse = 0.0;
  std::optional<double> residual;
  std::optional<double> i_total_rel_err;
  std::optional<double> wall_ms;
  std::optional<std::string> error;  // set when the cell failed
};

struct SummaryRow {
  std::string image;
  Camera camera = Camera::ClassicFull;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single trial
  std::size_t shots = 0;
  std::vector<double> values;
  std::size_t failures = 0;
};

struct ImageReport {
  std::string name;
  double reference_mse = 0.0;  // error of the classic m x n camera
  /// Trial-0 reconstruction per camera, in kAllCameras order; empty if the
  /// camera was not run.
  std::vector<ImagePlane> samples;
};

struct ExperimentResult {
  std::vector<TrialRow> trials;  // sorted by (image order, camera, trial)
  std::vector<SummaryRow> summary;
  std::vector<ImageReport> images;
  std::string psf_hash;
};

using ProgressFn = std::function<void(const TrialRow&)>;

/// Loads each source, simulates every camera for every trial and scores it.
/// Cells run on `cfg.jobs` threads; output order does not depend on it.
/// Cell failures are recorded in the row; load errors throw.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Resolves an image source (file or phantom) to the source-resolution plane.
ImagePlane load_source(const std::string& source, const ExperimentConfig& cfg);
std::string source_name(const std::string& source);

void write_trials_csv(const ExperimentResult& result, std::ostream& out);
void write_summary_csv(const ExperimentResult& result, std::ostream& out);
/// Human-readable table, one row per image: `mean (std)` per camera.
void write_summary_table(const ExperimentResult& result, std::ostream& out);
/// Image grid: one row per image, one column per camera (trial 0), with a
/// plain-text caption sidecar `<stem>.txt` holding the scores.
void write_figure_grid(const ExperimentResult& result, const std::filesystem::path& png_path);

/// A and B each score strictly below classic_half on every image. Lists
/// violations in `report` when given.
bool ordering_holds(const ExperimentResult& result, std::string* report = nullptr);

}  // namespace shiftcam
