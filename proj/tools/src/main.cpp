#include <iostream>

#include "shiftcam/cli/app.hpp"
#include "shiftcam/cli/config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return shiftcam::cli::run(args, std::cout, std::cerr, shiftcam::cli::shiftcam_environment());
}
