#pragma once

#include <cstddef>
#include <string>

#include "shiftcam/grid.hpp"

namespace shiftcam {

/// Geometry of the diffraction model. Lengths in meters.
struct OpticsConfig {
  double wavelength = 400e-9;
  double pixel_pitch = 1e-4;           // modulator (and detector) pixel
  double propagation_distance = 60e-3; // modulator to detector
  double modulator_side = 25.6e-3;
  std::size_t kernel_radius = 11;      // 23x23 kernel
  std::size_t oversampling = 8;        // starting sub-intervals per pixel

  void validate() const;
};

/// Incoherent point spread function of one modulator pixel, sampled at
/// pixel pitch and renormalized to unit sum after truncation.
struct Psf {
  std::size_t radius = 0;
  RealGrid kernel{1, 1, 1.0};
  /// Fraction of the propagated energy inside the (2r+1)^2 window before
  /// renormalization.
  double energy_fraction = 1.0;
  /// Sub-intervals per pixel at which the quadrature gate passed.
  std::size_t oversampling = 0;
  /// Largest entry change between the last two oversampling levels.
  double convergence_delta = 0.0;

  std::size_t size() const noexcept { return 2 * radius + 1; }
  /// Kernel value at offset (di, dj) from the center.
  double at(long di, long dj) const noexcept {
    return kernel(static_cast<std::size_t>(di + static_cast<long>(radius)),
                  static_cast<std::size_t>(dj + static_cast<long>(radius)));
  }
};

/// Identity kernel (radius 0, value 1).
Psf delta_psf();

/// Builds a Psf from an explicit kernel (odd, square, nonnegative); the
/// kernel is renormalized to unit sum.
Psf psf_from_kernel(RealGrid kernel);

/// Convergence threshold for successive oversampling doublings, in units of
/// the unit-sum kernel.
inline constexpr double kPsfConvergenceTol = 1e-6;
inline constexpr std::size_t kPsfMaxOversampling = std::size_t{1} << 15;

/// Squared-magnitude Fresnel field of a uniformly lit square aperture, pixel
/// integrated. The aperture is separable, so the kernel is the outer product
/// of two slit profiles. Doubles the oversampling until successive kernels
/// agree to kPsfConvergenceTol; throws ErrorKind::Numerical if that never
/// happens below kPsfMaxOversampling.
Psf compute_psf(const OpticsConfig& cfg);

/// One-dimensional slit profile: energy landing on detector pixel k (k in
/// [-r, r]) per unit aperture width, integrated with `oversampling`
/// Gauss-Legendre panels per pixel. Exposed for diagnostics and tests.
double slit_pixel_energy(const OpticsConfig& cfg, long k, std::size_t oversampling);

/// Same-size 2-D linear convolution with zero padding.
RealGrid blur_pattern(const RealGrid& pattern, const Psf& psf);

/// Stable 64-bit FNV-1a over radius and kernel bits, as 16 hex digits.
std::string psf_hash(const Psf& psf);

}  // namespace shiftcam
