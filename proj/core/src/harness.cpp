#include "shiftcam/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "shiftcam/artifacts.hpp"
#include "shiftcam/error.hpp"
#include "shiftcam/image_io.hpp"
#include "shiftcam/rng.hpp"

namespace shiftcam {
namespace {

constexpr std::uint64_t kParallelTag = 0x7061;    // "pa"
constexpr std::uint64_t kSequentialTag = 0x7365;  // "se"

constexpr std::string_view kPhantomPrefix = "phantom:";

std::size_t camera_index(Camera c) noexcept { return static_cast<std::size_t>(c); }

bool is_classic(Camera c) noexcept { return c == Camera::ClassicFull || c == Camera::ClassicHalf; }

struct PreparedImage {
  std::string name;
  ImagePlane source;
  ImagePlane reference;  // classic m x n
  std::size_t factor = 1;
  double reference_mse = 0.0;
};

double score(const ImagePlane& x, const PreparedImage& img, MseReference ref) {
  return ref == MseReference::Original ? mse(upsample_replicate(x, img.factor), img.source) : mse(x, img.reference);
}

struct Cell {
  std::size_t image = 0;
  Camera camera = Camera::ClassicFull;
  std::size_t trial = 0;
};

struct CellOutput {
  TrialRow row;
  ImagePlane recon;
};

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string_view to_string(Camera camera) noexcept {
  switch (camera) {
    case Camera::ClassicFull: return "classic_full";
    case Camera::ClassicHalf: return "classic_half";
    case Camera::SequentialCi: return "sequential_ci";
    case Camera::ParallelA: return "parallel_A";
    case Camera::ParallelB: return "parallel_B";
  }
  return "?";
}

Camera parse_camera(std::string_view name) {
  for (Camera c : kAllCameras)
    if (to_string(c) == name) return c;
  fail(ErrorKind::Config, "unknown camera '" + std::string(name) +
                              "' (expected classic_full, classic_half, sequential_ci, parallel_A, parallel_B)");
}

std::size_t shot_count(Camera camera, std::size_t budget) noexcept {
  switch (camera) {
    case Camera::SequentialCi: return budget;
    case Camera::ParallelA: return 2;
    default: return 1;
  }
}

std::string_view to_string(MseReference ref) noexcept { return ref == MseReference::Original ? "original" : "classic"; }

MseReference parse_mse_reference(std::string_view name) {
  if (name == "original") return MseReference::Original;
  if (name == "classic") return MseReference::Classic;
  fail(ErrorKind::Config, "unknown mse reference '" + std::string(name) + "' (expected original or classic)");
}

void ExperimentConfig::validate() const {
  if (rows < 8 || cols < 8 || rows % 2 || cols % 2)
    fail(ErrorKind::Config, "experiment: target size must be even and at least 8x8");
  if (trials == 0) fail(ErrorKind::Config, "experiment: trials must be at least 1");
  if (cameras.empty()) fail(ErrorKind::Config, "experiment: no cameras selected");
  if (phantom_scale == 0) fail(ErrorKind::Config, "experiment: phantom_scale must be positive");
  if (effective_budget() > rows * cols) fail(ErrorKind::Config, "experiment: budget exceeds the pixel count");
  if (jobs == 0) fail(ErrorKind::Config, "experiment: jobs must be positive");
  optics.validate();
  solver.validate();
}

double mse(const ImagePlane& a, const ImagePlane& b) {
  if (!a.same_shape(b))
    fail(ErrorKind::InvalidArgument, "mse: shapes differ (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  if (a.empty()) fail(ErrorKind::InvalidArgument, "mse: empty images");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.storage()[k] - b.storage()[k];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

ImagePlane simulate_classic(const ImagePlane& source, std::size_t out_rows, std::size_t out_cols) {
  if (out_rows == 0 || out_cols == 0 || source.rows() % out_rows || source.cols() % out_cols ||
      source.rows() / out_rows != source.cols() / out_cols)
    fail(ErrorKind::InvalidArgument, "simulate_classic: " + std::to_string(source.rows()) + "x" +
                                         std::to_string(source.cols()) + " is not a square-block multiple of " +
                                         std::to_string(out_rows) + "x" + std::to_string(out_cols));
  return block_average(source, source.rows() / out_rows);
}

SequentialAcquisition simulate_sequential_ci(const ImagePlane& scene, std::size_t budget, std::uint64_t seed) {
  if (budget == 0 || budget > scene.size())
    fail(ErrorKind::InvalidArgument, "simulate_sequential_ci: budget must lie in [1, " + std::to_string(scene.size()) + "]");
  SequentialAcquisition acq;
  acq.op = std::make_shared<DenseBipolarOperator>(budget, scene.rows(), scene.cols(), seed);
  acq.y = acq.op->forward(scene.values());
  return acq;
}

ParallelAcquisition simulate_parallel(const ImagePlane& scene, const ModulatorPattern& pattern, const Psf* psf,
                                      Architecture arch, BipolarModel model) {
  require(arch != Architecture::Full, "simulate_parallel: expected architecture A or B");
  const SensingOperator physical = make_operator(pattern, psf, SensingMode::Raw01, Architecture::Full);
  const MeasurementSet raw = downsample(forward_full(physical, scene), arch);
  const double truth = sum(scene);

  double i_total = 0.0;
  OperatorOptions options;
  options.bipolar_model = model;
  if (arch == Architecture::B) {
    i_total = i_total_from_B(raw, pattern);
    options.i_total_source = ITotalSource::InBand;
  } else {
    // second exposure with every modulator pixel open, read by a bucket detector
    i_total = truth;
    options.i_total_source = ITotalSource::External;
  }
  ParallelAcquisition acq{make_operator(pattern, psf, SensingMode::Bipolar, arch, options),
                          convert_measurements(raw, i_total), i_total, 0.0};
  acq.i_total_rel_err = truth > 0.0 ? std::abs(i_total - truth) / truth : std::abs(i_total);
  return acq;
}

std::string source_name(const std::string& source) {
  if (source.starts_with(kPhantomPrefix)) return source.substr(kPhantomPrefix.size());
  return std::filesystem::path(source).stem().string();
}

ImagePlane load_source(const std::string& source, const ExperimentConfig& cfg) {
  if (source.starts_with(kPhantomPrefix)) {
    const PhantomKind kind = parse_phantom_kind(source.substr(kPhantomPrefix.size()));
    return make_phantom(kind, cfg.rows * cfg.phantom_scale, cfg.cols * cfg.phantom_scale);
  }
  return load_image(source);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.images.empty()) fail(ErrorKind::Config, "experiment: no images given");
  const std::size_t budget = cfg.effective_budget();

  std::vector<PreparedImage> images;
  for (const std::string& src : cfg.images) {
    PreparedImage p;
    p.name = source_name(src);
    p.source = load_source(src, cfg);
    p.reference = simulate_classic(p.source, cfg.rows, cfg.cols);
    p.factor = p.source.rows() / cfg.rows;
    p.reference_mse = mse(upsample_replicate(p.reference, p.factor), p.source);
    images.push_back(std::move(p));
  }

  const bool any_parallel = std::any_of(cfg.cameras.begin(), cfg.cameras.end(), [](Camera c) {
    return c == Camera::ParallelA || c == Camera::ParallelB;
  });
  Psf psf = delta_psf();
  if (cfg.diffraction && any_parallel) {
    psf = compute_psf(cfg.optics);
  }

  std::vector<Camera> cameras = cfg.cameras;
  std::sort(cameras.begin(), cameras.end());
  cameras.erase(std::unique(cameras.begin(), cameras.end()), cameras.end());

  std::vector<Cell> cells;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (Camera c : cameras) {
      if (is_classic(c)) {
        cells.push_back({i, c, 0});  // deterministic: computed once, copied to every trial
      } else {
        for (std::size_t t = 0; t < cfg.trials; ++t) cells.push_back({i, c, t});
      }
    }

  std::vector<CellOutput> outputs(cells.size());
  std::mutex progress_mutex;
  auto run_cell = [&](std::size_t k) {
    const Cell& cell = cells[k];
    const PreparedImage& img = images[cell.image];
    CellOutput& out = outputs[k];
    TrialRow& row = out.row;
    row.image = img.name;
    row.camera = cell.camera;
    row.trial = cell.trial;
    const auto start = std::chrono::steady_clock::now();
    try {
      switch (cell.camera) {
        case Camera::ClassicFull:
          out.recon = img.reference;
          break;
        case Camera::ClassicHalf:
          out.recon = upsample_replicate(simulate_classic(img.source, cfg.rows / 2, cfg.cols / 2), 2);
          break;
        case Camera::SequentialCi: {
          row.seed = derive_seed(cfg.seed_base, {cell.trial, kSequentialTag});
          const SequentialAcquisition acq = simulate_sequential_ci(img.reference, budget, row.seed);
          ReconResult r = reconstruct(*acq.op, acq.y, cfg.solver);
          row.residual = r.final_residual;
          out.recon = std::move(r.image);
          break;
        }
        case Camera::ParallelA:
        case Camera::ParallelB: {
          row.seed = derive_seed(cfg.seed_base, {cell.trial, kParallelTag});
          const ModulatorPattern pattern = generate_pattern(cfg.rows, cfg.cols, row.seed);
          const Architecture arch = cell.camera == Camera::ParallelA ? Architecture::A : Architecture::B;
          const ParallelAcquisition acq = simulate_parallel(img.reference, pattern, &psf, arch, cfg.bipolar_model);
          ReconResult r = reconstruct(acq.op, acq.converted.values, cfg.solver);
          row.residual = r.final_residual;
          row.i_total_rel_err = acq.i_total_rel_err;
          out.recon = std::move(r.image);
          break;
        }
      }
      row.mse = score(out.recon, img, cfg.mse_reference);
      row.normalized_mse = row.mse / std::max(img.reference_mse, kMseFloor);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.mse = row.normalized_mse = std::nan("");
    }
    if (cfg.record_timing)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(row);
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) run_cell(k);
  };
  const std::size_t threads = std::min(cfg.jobs, cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ExperimentResult result;
  result.psf_hash = psf_hash(psf);
  for (const PreparedImage& img : images) {
    ImageReport rep;
    rep.name = img.name;
    rep.reference_mse = img.reference_mse;
    rep.samples.resize(std::size(kAllCameras));
    result.images.push_back(std::move(rep));
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Cell& cell = cells[k];
    CellOutput& out = outputs[k];
    if (cell.trial == 0) result.images[cell.image].samples[camera_index(cell.camera)] = out.recon;
    if (is_classic(cell.camera)) {
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        TrialRow copy = out.row;
        copy.trial = t;
        result.trials.push_back(std::move(copy));
      }
    } else {
      result.trials.push_back(std::move(out.row));
    }
  }
  // cells were enumerated in (image, camera, trial) order already; the sort
  // pins that contract independently of how cells are scheduled
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < images.size(); ++i) order.emplace(images[i].name, i);
  std::stable_sort(result.trials.begin(), result.trials.end(), [&](const TrialRow& a, const TrialRow& b) {
    const auto ka = std::make_tuple(order.at(a.image), a.camera, a.trial);
    const auto kb = std::make_tuple(order.at(b.image), b.camera, b.trial);
    return ka < kb;
  });

  for (std::size_t i = 0; i < images.size(); ++i)
    for (Camera c : cameras) {
      SummaryRow s;
      s.image = images[i].name;
      s.camera = c;
      s.shots = shot_count(c, budget);
      for (const TrialRow& r : result.trials)
        if (r.image == s.image && r.camera == c) {
          if (r.error) ++s.failures;
          else s.values.push_back(r.normalized_mse);
        }
      if (!s.values.empty()) {
        double acc = 0.0;
        for (double v : s.values) acc += v;
        s.mean = acc / static_cast<double>(s.values.size());
        const bool constant = std::all_of(s.values.begin(), s.values.end(), [&](double v) { return v == s.values[0]; });
        if (constant) {
          s.mean = s.values[0];
        } else if (s.values.size() > 1) {
          double ss = 0.0;
          for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
          s.std = std::sqrt(ss / static_cast<double>(s.values.size() - 1));
        }
      } else {
        s.mean = s.std = std::nan("");
      }
      result.summary.push_back(std::move(s));
    }
  return result;
}

void write_trials_csv(const ExperimentResult& result, std::ostream& out) {
  out << "image,camera,trial,seed,normalized_mse,mse,residual,i_total_rel_err,wall_ms\n";
  for (const TrialRow& r : result.trials) {
    out << r.image << ',' << to_string(r.camera) << ',' << r.trial << ',' << r.seed << ',';
    if (r.error) out << "nan,nan,,,";
    else out << format_double(r.normalized_mse) << ',' << format_double(r.mse) << ',' << fmt_opt(r.residual) << ','
             << fmt_opt(r.i_total_rel_err) << ',';
    out << fmt_opt(r.wall_ms) << '\n';
  }
}

void write_summary_csv(const ExperimentResult& result, std::ostream& out) {
  out << "image,camera,mean_normalized_mse,std_normalized_mse,trials,failures,shots\n";
  for (const SummaryRow& s : result.summary)
    out << s.image << ',' << to_string(s.camera) << ',' << format_double(s.mean) << ',' << format_double(s.std) << ','
        << s.values.size() << ',' << s.failures << ',' << s.shots << '\n';
}

void write_summary_table(const ExperimentResult& result, std::ostream& out) {
  std::vector<Camera> cams;
  for (const SummaryRow& s : result.summary)
    if (std::find(cams.begin(), cams.end(), s.camera) == cams.end()) cams.push_back(s.camera);
  std::size_t name_w = 5;
  for (const ImageReport& img : result.images) name_w = std::max(name_w, img.name.size());
  out << std::left << std::setw(static_cast<int>(name_w)) << "image";
  for (Camera c : cams) out << "  " << std::setw(16) << to_string(c);
  out << '\n';
  for (const ImageReport& img : result.images) {
    out << std::setw(static_cast<int>(name_w)) << img.name;
    for (Camera c : cams) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3);
      for (const SummaryRow& s : result.summary)
        if (s.image == img.name && s.camera == c) {
          cell << s.mean << " (" << s.std << ')';
          if (s.failures) cell << '!';
        }
      out << "  " << std::setw(16) << cell.str();
    }
    out << '\n';
  }
  out << std::right;
}

void write_figure_grid(const ExperimentResult& result, const std::filesystem::path& png_path) {
  constexpr std::size_t gap = 4;
  std::vector<std::size_t> columns;
  std::size_t tile_r = 0, tile_c = 0;
  for (std::size_t c = 0; c < std::size(kAllCameras); ++c)
    for (const ImageReport& img : result.images)
      if (!img.samples[c].empty()) {
        if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
        tile_r = img.samples[c].rows();
        tile_c = img.samples[c].cols();
      }
  if (columns.empty()) fail(ErrorKind::InvalidArgument, "write_figure_grid: no reconstructions to draw");
  const std::size_t nrows = result.images.size();
  ImagePlane grid(nrows * tile_r + (nrows - 1) * gap, columns.size() * tile_c + (columns.size() - 1) * gap, 1.0);
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const ImagePlane& tile = result.images[i].samples[columns[k]];
      if (tile.empty()) continue;
      for (std::size_t r = 0; r < tile_r; ++r)
        for (std::size_t c = 0; c < tile_c; ++c) grid(i * (tile_r + gap) + r, k * (tile_c + gap) + c) = tile(r, c);
    }
  save_image(grid, png_path);

  std::filesystem::path caption = png_path;
  caption.replace_extension(".txt");
  std::ofstream out(caption);
  if (!out) fail(ErrorKind::Io, "cannot write " + caption.string());
  out << "columns:";
  for (std::size_t c : columns) out << ' ' << to_string(kAllCameras[c]);
  out << "\nrows:";
  for (const ImageReport& img : result.images) out << ' ' << img.name;
  out << "\ntiles show trial 0; scores are mean (std) normalized MSE over all trials\n";
  out << "psf_hash: " << result.psf_hash << "\n\n";
  write_summary_table(result, out);
}

bool ordering_holds(const ExperimentResult& result, std::string* report) {
  bool ok = true;
  std::ostringstream msg;
  for (const ImageReport& img : result.images) {
    const SummaryRow* half = nullptr;
    std::vector<const SummaryRow*> parallel;
    for (const SummaryRow& s : result.summary) {
      if (s.image != img.name) continue;
      if (s.camera == Camera::ClassicHalf) half = &s;
      if (s.camera == Camera::ParallelA || s.camera == Camera::ParallelB) parallel.push_back(&s);
    }
    if (!half || parallel.empty()) {
      ok = false;
      msg << img.name << ": ordering needs classic_half and at least one parallel camera\n";
      continue;
    }
    for (const SummaryRow* p : parallel)
      if (!(p->failures == 0 && p->mean < half->mean)) {
        ok = false;
        msg << img.name << ": " << to_string(p->camera) << " mean " << p->mean << " is not below classic_half "
            << half->mean << '\n';
      }
  }
  if (report) *report = msg.str();
  return ok;
}

}  // namespace shiftcam
