#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace shiftcam::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitCheckFailed = 4,
};

/// Entry point shared by the executable and the tests. `env` replaces the
/// process environment so tests stay hermetic.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env);

}  // namespace shiftcam::cli
