#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "shiftcam/harness.hpp"
#include "shiftcam/optics.hpp"
#include "shiftcam/sensing.hpp"
#include "shiftcam/solver.hpp"

namespace shiftcam::cli {

/// Settings for a single acquisition (`acquire` / `reconstruct`).
struct SensingSettings {
  Architecture arch = Architecture::B;
  std::uint64_t seed = 1;
  bool diffraction = true;
  BipolarModel bipolar_model = BipolarModel::Consistent;
};

struct GlobalConfig {
  OpticsConfig optics;
  SolverConfig solver;
  ExperimentConfig experiment;
  SensingSettings sensing;
  std::filesystem::path out_dir = ".";
  int verbosity = 0;
};

/// One documented, typed configuration key.
struct ConfigKey {
  std::string name;  // dotted, e.g. optics.wavelength
  std::string help;
  std::function<void(GlobalConfig&, const std::string&)> set;
  std::function<std::string(const GlobalConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_key(const std::string& name);

/// `SHIFTCAM_OPTICS__WAVELENGTH` -> `optics.wavelength`.
std::string env_to_key(const std::string& env_name);
std::string key_to_env(const std::string& key);
inline constexpr const char* kEnvPrefix = "SHIFTCAM_";

/// Applies configuration layers in order (file, environment, flags), keeping
/// a log of every assignment. Unknown keys and unparsable values throw
/// ErrorKind::Config naming the key and its origin.
class ConfigBuilder {
 public:
  ConfigBuilder() = default;

  void set(const std::string& key, const std::string& value, const std::string& origin);
  /// `key=value` lines; `#` starts a comment; blank lines ignored.
  void apply_file(const std::filesystem::path& path);
  /// Every variable starting with SHIFTCAM_ must name a key.
  void apply_environment(const std::map<std::string, std::string>& env);

  const GlobalConfig& config() const noexcept { return cfg_; }
  GlobalConfig& config() noexcept { return cfg_; }
  const std::vector<std::string>& log() const noexcept { return log_; }

 private:
  GlobalConfig cfg_;
  std::vector<std::string> log_;
};

/// Snapshot of the process environment restricted to SHIFTCAM_ variables.
std::map<std::string, std::string> shiftcam_environment();

/// All keys with current values, `key=value` per line, sorted.
std::string dump_config(const GlobalConfig& cfg);

}  // namespace shiftcam::cli
