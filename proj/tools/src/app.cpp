#include "shiftcam/cli/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "shiftcam/artifacts.hpp"
#include "shiftcam/cli/config.hpp"
#include "shiftcam/error.hpp"
#include "shiftcam/harness.hpp"
#include "shiftcam/image_io.hpp"

namespace shiftcam::cli {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

Psf psf_for(const GlobalConfig& cfg, bool diffraction) { return diffraction ? compute_psf(cfg.optics) : delta_psf(); }

/// Scene at the configured resolution: sources larger than that go through
/// the classic camera first.
ImagePlane load_scene(const std::string& source, const GlobalConfig& cfg) {
  ImagePlane img = load_source(source, cfg.experiment);
  if (img.rows() == cfg.experiment.rows && img.cols() == cfg.experiment.cols) return img;
  return simulate_classic(img, cfg.experiment.rows, cfg.experiment.cols);
}

// --- psf ------------------------------------------------------------------

int cmd_psf(const GlobalConfig& cfg, std::ostream& out) {
  const Psf psf = compute_psf(cfg.optics);
  ensure_dir(cfg.out_dir);
  const fs::path csv = cfg.out_dir / "psf.csv";
  {
    std::ofstream f(csv);
    if (!f) fail(ErrorKind::Io, "cannot write " + csv.string());
    for (std::size_t r = 0; r < psf.size(); ++r) {
      for (std::size_t c = 0; c < psf.size(); ++c) f << (c ? "," : "") << format_double(psf.kernel(r, c));
      f << '\n';
    }
  }

  const double peak = *std::max_element(psf.kernel.storage().begin(), psf.kernel.storage().end());
  const std::size_t mag = std::max<std::size_t>(1, 256 / psf.size());
  ImagePlane heat(psf.size() * mag, psf.size() * mag);
  for (std::size_t r = 0; r < heat.rows(); ++r)
    for (std::size_t c = 0; c < heat.cols(); ++c) heat(r, c) = psf.kernel(r / mag, c / mag) / peak;
  save_image(heat, cfg.out_dir / "psf.png");

  double total = 0.0;
  for (double v : psf.kernel.storage()) total += v;
  const fs::path report = cfg.out_dir / "psf_report.txt";
  std::ofstream f(report);
  if (!f) fail(ErrorKind::Io, "cannot write " + report.string());
  auto emit = [&](std::ostream& o) {
    o << "size=" << psf.size() << 'x' << psf.size() << '\n'
      << "sum=" << std::fixed << std::setprecision(12) << total << std::defaultfloat << '\n'
      << "center=" << format_double(psf.at(0, 0)) << '\n'
      << "energy_fraction=" << format_double(psf.energy_fraction) << '\n'
      << "oversampling=" << psf.oversampling << '\n'
      << "convergence_delta=" << format_double(psf.convergence_delta) << '\n'
      << "converged=true\n"
      << "psf_hash=" << psf_hash(psf) << '\n';
  };
  emit(f);
  for (const ConfigKey& k : config_keys())
    if (k.name.starts_with("optics.")) f << k.name << '=' << k.get(cfg) << '\n';
  emit(out);
  return kExitOk;
}

// --- acquire --------------------------------------------------------------

int cmd_acquire(const GlobalConfig& cfg, const std::string& source, std::optional<fs::path> output, std::ostream& out) {
  const std::size_t m = cfg.experiment.rows, n = cfg.experiment.cols;
  const ImagePlane scene = load_scene(source, cfg);
  const ModulatorPattern pattern = generate_pattern(m, n, cfg.sensing.seed);
  const Psf psf = psf_for(cfg, cfg.sensing.diffraction);
  const SensingOperator physical = make_operator(pattern, &psf, SensingMode::Raw01, Architecture::Full);

  MeasurementArtifact a;
  a.measurements = downsample(forward_full(physical, scene), cfg.sensing.arch);
  // A cannot derive I_total from its own readings; the all-open second shot
  // records the scene's total irradiance.
  if (cfg.sensing.arch == Architecture::A) a.measurements.i_total = sum(scene);
  a.pattern_seed = cfg.sensing.seed;
  a.psf_hash = psf_hash(psf);

  const fs::path meas_path = output ? *output : cfg.out_dir / "measurements.scm";
  if (meas_path.has_parent_path()) ensure_dir(meas_path.parent_path());
  fs::path pattern_path = meas_path;
  pattern_path.replace_filename(meas_path.stem().string() + "_pattern.pgm");

  a.extra["source"] = source;
  a.extra["pattern_file"] = pattern_path.filename().string();
  a.extra["diffraction"] = cfg.sensing.diffraction ? "true" : "false";
  a.extra["shots"] = cfg.sensing.arch == Architecture::A ? "2" : "1";
  for (const ConfigKey& k : config_keys())
    if (k.name.starts_with("optics.")) a.extra[k.name] = k.get(cfg);

  write_measurements(a, meas_path);
  save_pattern(pattern, pattern_path);
  out << "wrote " << meas_path.string() << ": " << a.measurements.values.size() << " " << to_string(cfg.sensing.arch)
      << " readings, seed " << a.pattern_seed << ", psf " << a.psf_hash << '\n';
  return kExitOk;
}

// --- reconstruct ----------------------------------------------------------

int cmd_reconstruct(const GlobalConfig& cfg, const fs::path& input, std::optional<fs::path> output,
                    std::optional<fs::path> trace_path, std::optional<std::string> reference, std::ostream& out) {
  const MeasurementArtifact a = read_measurements(input);
  const MeasurementSet& meas = a.measurements;
  const auto diff = a.extra.find("diffraction");
  const bool diffraction = diff == a.extra.end() || diff->second != "false";
  const Psf psf = psf_for(cfg, diffraction);
  if (psf_hash(psf) != a.psf_hash)
    fail(ErrorKind::Provenance, "psf hash mismatch: " + input.string() + " was acquired with " + a.psf_hash +
                                    ", current optics configuration gives " + psf_hash(psf));

  const ModulatorPattern pattern = generate_pattern(meas.image_rows, meas.image_cols, a.pattern_seed);
  MeasurementSet converted = meas;
  if (meas.stage == Stage::Raw) {
    double i_total = 0.0;
    if (meas.arch == Architecture::A) {
      if (!meas.i_total)
        fail(ErrorKind::Provenance, input.string() + ": architecture A needs the recorded all-open shot (i_total)");
      i_total = *meas.i_total;
    } else {
      i_total = i_total_in_band(meas, pattern);
    }
    converted = convert_measurements(meas, i_total);
  }
  OperatorOptions options;
  options.bipolar_model = cfg.sensing.bipolar_model;
  options.i_total_source = meas.arch == Architecture::A ? ITotalSource::External : ITotalSource::InBand;
  const SensingOperator op = make_operator(pattern, &psf, SensingMode::Bipolar, meas.arch, options);
  const ReconResult r = reconstruct(op, converted.values, cfg.solver);

  fs::path img_path = output ? *output : cfg.out_dir / "recon.png";
  if (img_path.has_parent_path()) ensure_dir(img_path.parent_path());
  save_image(r.image, img_path);

  std::ostringstream metrics;
  metrics << "iterations=" << r.iterations << '\n' << "final_residual=" << format_double(r.final_residual) << '\n';
  if (reference) {
    const ImagePlane truth = load_scene(*reference, cfg);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      num += (r.image.storage()[k] - truth.storage()[k]) * (r.image.storage()[k] - truth.storage()[k]);
      den += truth.storage()[k] * truth.storage()[k];
    }
    metrics << "relative_error=" << format_double(den > 0 ? std::sqrt(num / den) : std::sqrt(num)) << '\n';
  }
  out << metrics.str();

  fs::path metrics_path = img_path;
  metrics_path.replace_extension(".txt");
  std::ofstream mf(metrics_path);
  if (!mf) fail(ErrorKind::Io, "cannot write " + metrics_path.string());
  mf << "measurements=" << input.string() << '\n'
     << "arch=" << to_string(meas.arch) << '\n'
     << "seed=" << a.pattern_seed << '\n'
     << "psf_hash=" << a.psf_hash << '\n'
     << metrics.str();
  for (const ConfigKey& k : config_keys())
    if (k.name.starts_with("solver.") || k.name == "sensing.bipolar_model") mf << k.name << '=' << k.get(cfg) << '\n';

  if (trace_path) {
    std::ofstream tf(*trace_path);
    if (!tf) fail(ErrorKind::Io, "cannot write " + trace_path->string());
    tf << "iteration,objective,residual\n";
    for (const TraceRow& row : r.trace)
      tf << row.iteration << ',' << format_double(row.objective) << ',' << format_double(row.residual) << '\n';
  }
  return kExitOk;
}

// --- table ----------------------------------------------------------------

int cmd_table(const GlobalConfig& cfg, bool check, std::ostream& out, std::ostream& err) {
  ProgressFn progress;
  if (cfg.verbosity > 0)
    progress = [&err](const TrialRow& r) {
      err << "  " << r.image << ' ' << to_string(r.camera) << " trial " << r.trial;
      if (r.error) err << " FAILED: " << *r.error;
      else err << " nmse " << r.normalized_mse;
      err << '\n';
    };
  const ExperimentResult result = run_experiment(cfg.experiment, progress);
  ensure_dir(cfg.out_dir);
  {
    std::ofstream f(cfg.out_dir / "table.csv", std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write table.csv");
    write_trials_csv(result, f);
  }
  {
    std::ofstream f(cfg.out_dir / "summary.csv", std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write summary.csv");
    write_summary_csv(result, f);
  }
  {
    std::ofstream f(cfg.out_dir / "config.txt");
    f << dump_config(cfg);
  }
  write_figure_grid(result, cfg.out_dir / "figure.png");
  write_summary_table(result, out);

  std::size_t failures = 0;
  for (const SummaryRow& s : result.summary) failures += s.failures;
  if (failures) err << failures << " trial(s) failed; see table.csv\n";
  if (check) {
    std::string report;
    if (!ordering_holds(result, &report)) {
      err << "check failed:\n" << report;
      return kExitCheckFailed;
    }
    out << "check passed: parallel A and B below classic_half on every image\n";
  }
  return failures ? kExitNumerical : kExitOk;
}

int exit_code_for(const Error& e) { return e.kind() == ErrorKind::Numerical ? kExitNumerical : kExitConfig; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env) {
  CLI::App app{"shiftcam: parallel compressive imaging simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "shiftcam 0.1.0");

  std::string config_file;
  int verbose = 0;
  app.add_option("--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", verbose, "log configuration layers and progress");

  // every config key is also a flag, accepted before or after the subcommand
  std::map<std::string, std::string> key_values;
  std::map<std::string, CLI::Option*> key_opts;
  for (const ConfigKey& k : config_keys())
    key_opts[k.name] = app.add_option("--" + k.name, key_values[k.name], k.help)->group("Configuration keys");

  auto* psf = app.add_subcommand("psf", "compute the diffraction kernel (CSV, heat map, convergence report)");
  auto* acquire = app.add_subcommand("acquire", "simulate one raw acquisition and write a measurement file");
  auto* recon = app.add_subcommand("reconstruct", "rebuild the operator from a measurement file and solve");
  auto* table = app.add_subcommand("table", "run the camera comparison experiment");
  for (auto* sub : {psf, acquire, recon, table}) sub->fallthrough();

  std::string radius, distance, out_dir, arch, seed, images, trials, jobs;
  for (auto* sub : {psf, table}) {
    sub->add_option("--radius", radius, "alias of --optics.kernel_radius");
    sub->add_option("--distance", distance, "alias of --optics.propagation_distance [m]");
  }
  for (auto* sub : {psf, acquire, recon, table}) sub->add_option("-o,--out-dir", out_dir, "alias of --io.out_dir");

  std::string source;
  std::string meas_file_out;
  acquire->add_option("source", source, "image file or phantom:<flat|quadrants|disk>")->required();
  acquire->add_option("--arch", arch, "alias of --sensing.arch");
  acquire->add_option("--seed", seed, "alias of --sensing.seed");
  acquire->add_option("--output", meas_file_out, "measurement file (default <out-dir>/measurements.scm)");

  std::string meas_file_in, recon_out, trace_out, reference;
  recon->add_option("measurements", meas_file_in, "measurement file from acquire")->required()->check(CLI::ExistingFile);
  recon->add_option("--output", recon_out, "reconstructed image (default <out-dir>/recon.png)");
  recon->add_option("--trace", trace_out, "write the iteration trace CSV here");
  recon->add_option("--reference", reference, "ground-truth source; reports the relative l2 error");

  bool check = false;
  table->add_option("--images", images, "alias of --experiment.images");
  table->add_option("--trials", trials, "alias of --experiment.trials");
  table->add_option("--seed", seed, "alias of --experiment.seed_base");
  table->add_option("--jobs", jobs, "alias of --experiment.jobs");
  table->add_flag("--check", check, "exit 4 unless parallel A and B beat classic_half on every image");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ConfigBuilder builder;
    builder.config().experiment.jobs = std::max(1u, std::thread::hardware_concurrency());
    if (!config_file.empty()) builder.apply_file(config_file);
    builder.apply_environment(env);
    for (const auto& [key, opt] : key_opts)
      if (opt->count()) builder.set(key, key_values[key], "flag --" + key);
    auto alias = [&](const std::string& value, const std::string& key, const std::string& flag) {
      if (!value.empty()) builder.set(key, value, "flag " + flag);
    };
    alias(radius, "optics.kernel_radius", "--radius");
    alias(distance, "optics.propagation_distance", "--distance");
    alias(out_dir, "io.out_dir", "--out-dir");
    alias(arch, "sensing.arch", "--arch");
    alias(images, "experiment.images", "--images");
    alias(trials, "experiment.trials", "--trials");
    alias(jobs, "experiment.jobs", "--jobs");
    if (!seed.empty()) alias(seed, *table ? "experiment.seed_base" : "sensing.seed", "--seed");
    if (verbose > 0) builder.set("io.verbosity", std::to_string(verbose), "flag -v");

    const GlobalConfig& cfg = builder.config();
    if (cfg.verbosity > 0) {
      for (const std::string& line : builder.log()) err << "config " << line << '\n';
      err << "effective configuration:\n" << dump_config(cfg);
    }
    cfg.optics.validate();
    cfg.solver.validate();

    if (*psf) return cmd_psf(cfg, out);
    if (*acquire)
      return cmd_acquire(cfg, source, meas_file_out.empty() ? std::nullopt : std::optional<fs::path>(meas_file_out), out);
    if (*recon)
      return cmd_reconstruct(cfg, meas_file_in, recon_out.empty() ? std::nullopt : std::optional<fs::path>(recon_out),
                             trace_out.empty() ? std::nullopt : std::optional<fs::path>(trace_out),
                             reference.empty() ? std::nullopt : std::optional<std::string>(reference), out);
    if (*table) return cmd_table(cfg, check, out, err);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace shiftcam::cli
