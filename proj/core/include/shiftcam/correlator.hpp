#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "shiftcam/grid.hpp"

namespace shiftcam {

/// Valid-region cross-correlation of a fixed (2m x 2n) pattern with m x n
/// inputs, via FFTW on the (2m x 2n) grid:
///
///   out(i, j) = sum_{p<m, q<n} pattern(i + p, j + q) * z(p, q),  i < m, j < n.
///
/// The forward sensing map and its adjoint have exactly this form, so one
/// correlator serves both. Plans are built with FFTW_ESTIMATE so results are
/// bit-stable run to run; execution is reentrant.
class Correlator {
 public:
  Correlator(const RealGrid& pattern, std::size_t m, std::size_t n);
  ~Correlator();
  Correlator(const Correlator&) = delete;
  Correlator& operator=(const Correlator&) = delete;

  std::size_t rows() const noexcept { return m_; }
  std::size_t cols() const noexcept { return n_; }

  void correlate(std::span<const double> z, std::span<double> out) const;

 private:
  struct Plans;
  std::size_t m_;
  std::size_t n_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace shiftcam
