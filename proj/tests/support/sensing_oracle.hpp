#pragma once

// Expected sensing matrices built from the definitions: shifted windows of
// the (blurred) pattern, the I_total offset of the conversion, and the A/B
// row selections. Shared by the unit and acceptance tests.

#include "oracles.hpp"
#include "shiftcam/optics.hpp"
#include "shiftcam/sensing.hpp"

namespace oracle {

inline RealGrid pattern_real(const shiftcam::ModulatorPattern& p) {
  RealGrid g(p.grid.rows(), p.grid.cols());
  for (std::size_t k = 0; k < g.size(); ++k) g.storage()[k] = p.grid.storage()[k];
  return g;
}

inline double base_open(const shiftcam::ModulatorPattern& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.base_rows; ++i)
    for (std::size_t j = 0; j < p.base_cols; ++j) s += p.grid(i, j);
  return s;
}

/// Full (m*n x m*n) matrix of the operator make_operator is meant to build.
/// Raw01: windows of blur(P). Bipolar without blur: windows of 2P - 1.
/// Bipolar with blur: what a converted blurred acquisition measures, i.e.
/// 2 * windows of blur(P) minus I_total, where I_total is either the scene
/// sum (external shot) or the in-band estimate sum(raw) / open pixels.
inline RealGrid expected_full_matrix(const shiftcam::ModulatorPattern& p, const RealGrid* kernel, bool bipolar,
                                     bool external_i_total) {
  const std::size_t m = p.base_rows, n = p.base_cols;
  RealGrid pat = pattern_real(p);
  if (!bipolar) return sensing_matrix(kernel ? conv_same(pat, *kernel) : pat, m, n);
  if (!kernel) {
    for (double& v : pat.storage()) v = 2.0 * v - 1.0;
    return sensing_matrix(pat, m, n);
  }
  const RealGrid raw = sensing_matrix(conv_same(pat, *kernel), m, n);
  std::vector<double> offset(m * n, 1.0);
  if (!external_i_total) {
    // sum over all detectors of each column, divided by the open count
    for (std::size_t c = 0; c < m * n; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < m * n; ++r) s += raw(r, c);
      offset[c] = s / base_open(p);
    }
  }
  RealGrid out(m * n, m * n);
  for (std::size_t r = 0; r < m * n; ++r)
    for (std::size_t c = 0; c < m * n; ++c) out(r, c) = 2.0 * raw(r, c) - offset[c];
  return out;
}

inline RealGrid select_rows(const RealGrid& full, shiftcam::Architecture arch, std::size_t m, std::size_t n) {
  switch (arch) {
    case shiftcam::Architecture::A: return rows_A(full, m, n);
    case shiftcam::Architecture::B: return rows_B(full, m, n);
    default: return full;
  }
}

}  // namespace oracle
