#include "shiftcam/error.hpp"

namespace shiftcam {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Provenance: return "provenance mismatch";
  }
  return "error";
}

}  // namespace shiftcam
