#pragma once

#include <stdexcept>
#include <string>

namespace shiftcam {

enum class ErrorKind {
  InvalidArgument,
  Io,
  Format,
  Config,
  Numerical,
  Provenance,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` lets the CLI map failures
/// onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace shiftcam
