#include "shiftcam/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "shiftcam/artifacts.hpp"
#include "shiftcam/error.hpp"

extern char** environ;

namespace shiftcam::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(parse_u64(trim(v), "value")); }
double to_real(const std::string& v) { return parse_double(trim(v), "value"); }
bool to_bool(const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  fail(ErrorKind::Config, "not a boolean: '" + t + "'");
}
std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
ConfigKey size_key(std::string name, std::string help, T GlobalConfig::*section, std::size_t T::*field) {
  return {std::move(name), std::move(help),
          [=](GlobalConfig& c, const std::string& v) { (c.*section).*field = to_size(v); },
          [=](const GlobalConfig& c) { return std::to_string((c.*section).*field); }};
}

template <typename T>
ConfigKey real_key(std::string name, std::string help, T GlobalConfig::*section, double T::*field) {
  return {std::move(name), std::move(help),
          [=](GlobalConfig& c, const std::string& v) { (c.*section).*field = to_real(v); },
          [=](const GlobalConfig& c) { return format_double((c.*section).*field); }};
}

template <typename T>
ConfigKey bool_key(std::string name, std::string help, T GlobalConfig::*section, bool T::*field) {
  return {std::move(name), std::move(help),
          [=](GlobalConfig& c, const std::string& v) { (c.*section).*field = to_bool(v); },
          [=](const GlobalConfig& c) { return from_bool((c.*section).*field); }};
}

std::vector<ConfigKey> build_keys() {
  using G = GlobalConfig;
  std::vector<ConfigKey> k;
  k.push_back(real_key("optics.wavelength", "illumination wavelength [m]", &G::optics, &OpticsConfig::wavelength));
  k.push_back(real_key("optics.pixel_pitch", "modulator and detector pixel pitch [m]", &G::optics, &OpticsConfig::pixel_pitch));
  k.push_back(real_key("optics.propagation_distance", "modulator to detector distance [m]", &G::optics,
                       &OpticsConfig::propagation_distance));
  k.push_back(real_key("optics.modulator_side", "modulator side length [m]", &G::optics, &OpticsConfig::modulator_side));
  k.push_back(size_key("optics.kernel_radius", "psf radius r, kernel is (2r+1)^2", &G::optics, &OpticsConfig::kernel_radius));
  k.push_back(size_key("optics.oversampling", "initial quadrature panels per pixel", &G::optics, &OpticsConfig::oversampling));

  k.push_back(size_key("solver.max_outer_iters", "multiplier updates", &G::solver, &SolverConfig::max_outer_iters));
  k.push_back(size_key("solver.max_inner_iters", "alternations per outer iteration", &G::solver, &SolverConfig::max_inner_iters));
  k.push_back(size_key("solver.cg_iters", "CG steps per x-update", &G::solver, &SolverConfig::cg_iters));
  k.push_back(real_key("solver.beta", "TV splitting penalty", &G::solver, &SolverConfig::beta));
  k.push_back(real_key("solver.mu", "data fidelity penalty", &G::solver, &SolverConfig::mu));
  k.push_back(real_key("solver.continuation_factor", "penalty growth per stage", &G::solver, &SolverConfig::continuation_factor));
  k.push_back(size_key("solver.continuation_steps", "number of penalty increases", &G::solver, &SolverConfig::continuation_steps));
  k.push_back(real_key("solver.tol_rel_change", "relative change stopping tolerance", &G::solver, &SolverConfig::tol_rel_change));
  k.push_back(bool_key("solver.nonneg", "clamp negative pixels", &G::solver, &SolverConfig::nonneg));

  k.push_back({"experiment.images", "comma-separated image files or phantom:<flat|quadrants|disk>",
               [](G& c, const std::string& v) { c.experiment.images = split_list(v); },
               [](const G& c) { return join(c.experiment.images); }});
  k.push_back(size_key("experiment.rows", "reconstruction rows", &G::experiment, &ExperimentConfig::rows));
  k.push_back(size_key("experiment.cols", "reconstruction cols", &G::experiment, &ExperimentConfig::cols));
  k.push_back(size_key("experiment.trials", "random patterns per camera", &G::experiment, &ExperimentConfig::trials));
  k.push_back({"experiment.seed_base", "base of all trial seeds",
               [](G& c, const std::string& v) { c.experiment.seed_base = parse_u64(trim(v), "seed_base"); },
               [](const G& c) { return std::to_string(c.experiment.seed_base); }});
  k.push_back({"experiment.cameras", "comma-separated subset of the five cameras",
               [](G& c, const std::string& v) {
                 std::vector<Camera> cams;
                 for (const auto& name : split_list(v)) cams.push_back(parse_camera(name));
                 c.experiment.cameras = cams;
               },
               [](const G& c) {
                 std::vector<std::string> names;
                 for (Camera cam : c.experiment.cameras) names.emplace_back(to_string(cam));
                 return join(names);
               }});
  k.push_back(size_key("experiment.budget", "sequential camera measurements, 0 = rows*cols/4", &G::experiment,
                       &ExperimentConfig::budget));
  k.push_back(size_key("experiment.phantom_scale", "phantom source size / target size", &G::experiment,
                       &ExperimentConfig::phantom_scale));
  k.push_back(bool_key("experiment.diffraction", "blur parallel acquisitions with the psf", &G::experiment,
                       &ExperimentConfig::diffraction));
  k.push_back({"experiment.bipolar_model", "consistent or blurred_bipolar",
               [](G& c, const std::string& v) { c.experiment.bipolar_model = parse_bipolar_model(trim(v)); },
               [](const G& c) { return std::string(to_string(c.experiment.bipolar_model)); }});
  k.push_back({"experiment.mse_reference", "original or classic",
               [](G& c, const std::string& v) { c.experiment.mse_reference = parse_mse_reference(trim(v)); },
               [](const G& c) { return std::string(to_string(c.experiment.mse_reference)); }});
  k.push_back(bool_key("experiment.record_timing", "fill the wall_ms column (breaks byte-identical CSVs)", &G::experiment,
                       &ExperimentConfig::record_timing));
  k.push_back(size_key("experiment.jobs", "worker threads", &G::experiment, &ExperimentConfig::jobs));

  k.push_back({"sensing.arch", "detector architecture for acquire: full, A or B",
               [](G& c, const std::string& v) { c.sensing.arch = parse_architecture(trim(v)); },
               [](const G& c) { return std::string(to_string(c.sensing.arch)); }});
  k.push_back({"sensing.seed", "pattern seed for acquire",
               [](G& c, const std::string& v) { c.sensing.seed = parse_u64(trim(v), "seed"); },
               [](const G& c) { return std::to_string(c.sensing.seed); }});
  k.push_back(bool_key("sensing.diffraction", "blur the acquisition with the psf", &G::sensing, &SensingSettings::diffraction));
  k.push_back({"sensing.bipolar_model", "consistent or blurred_bipolar",
               [](G& c, const std::string& v) { c.sensing.bipolar_model = parse_bipolar_model(trim(v)); },
               [](const G& c) { return std::string(to_string(c.sensing.bipolar_model)); }});

  k.push_back({"io.out_dir", "directory for generated files",
               [](G& c, const std::string& v) { c.out_dir = trim(v); },
               [](const G& c) { return c.out_dir.string(); }});
  k.push_back({"io.verbosity", "0 quiet, 1 config layers and progress",
               [](G& c, const std::string& v) { c.verbosity = static_cast<int>(to_size(v)); },
               [](const G& c) { return std::to_string(c.verbosity); }});
  std::sort(k.begin(), k.end(), [](const ConfigKey& a, const ConfigKey& b) { return a.name < b.name; });
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey* find_key(const std::string& name) {
  for (const ConfigKey& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string env_to_key(const std::string& env_name) {
  std::string rest = env_name.substr(std::string(kEnvPrefix).size());
  std::string key;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == '_' && i + 1 < rest.size() && rest[i + 1] == '_') {
      key += '.';
      ++i;
    } else {
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
    }
  }
  return key;
}

std::string key_to_env(const std::string& key) {
  std::string env = kEnvPrefix;
  for (char c : key) {
    if (c == '.') env += "__";
    else env += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return env;
}

void ConfigBuilder::set(const std::string& key, const std::string& value, const std::string& origin) {
  const ConfigKey* k = find_key(key);
  if (!k) fail(ErrorKind::Config, origin + ": unknown configuration key '" + key + "'");
  try {
    k->set(cfg_, value);
  } catch (const Error& e) {
    fail(ErrorKind::Config, origin + ": bad value for " + key + ": " + e.what());
  }
  log_.push_back(origin + ": " + key + "=" + value);
}

void ConfigBuilder::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file " + path.string());
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string origin = path.string() + ":" + std::to_string(lineno);
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, origin + ": expected key=value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)), origin);
  }
}

void ConfigBuilder::apply_environment(const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env)
    if (name.starts_with(kEnvPrefix)) set(env_to_key(name), value, "env " + name);
}

std::map<std::string, std::string> shiftcam_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos && entry.starts_with(kEnvPrefix)) env.emplace(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

std::string dump_config(const GlobalConfig& cfg) {
  std::string out;
  for (const ConfigKey& k : config_keys()) out += k.name + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace shiftcam::cli
