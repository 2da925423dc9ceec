#include "shiftcam/optics.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>

#include "shiftcam/error.hpp"
#include "shiftcam/fresnel.hpp"

namespace shiftcam {
namespace {

// 4-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 4> kGlNodes = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                            0.8611363115940526};
constexpr std::array<double, 4> kGlWeights = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                              0.3478548451374538};

// |U(x)|^2 for a slit of width a, U normalized so that int |U|^2 dx = a.
double slit_intensity(double x, double half_width, double scale) {
  const FresnelCS hi = fresnel_integrals(scale * (half_width - x));
  const FresnelCS lo = fresnel_integrals(scale * (-half_width - x));
  const double dc = hi.c - lo.c;
  const double ds = hi.s - lo.s;
  return 0.5 * (dc * dc + ds * ds);
}

RealGrid kernel_at(const OpticsConfig& cfg, std::size_t oversampling, double* energy_fraction) {
  const std::size_t r = cfg.kernel_radius;
  std::vector<double> profile(2 * r + 1);
  for (std::size_t k = 0; k <= r; ++k) {
    const double e = slit_pixel_energy(cfg, static_cast<long>(k), oversampling);
    profile[r + k] = e;
    profile[r - k] = e;
  }
  const double total = std::accumulate(profile.begin(), profile.end(), 0.0);
  if (energy_fraction) *energy_fraction = (total / cfg.pixel_pitch) * (total / cfg.pixel_pitch);
  for (double& v : profile) v /= total;
  RealGrid kernel(2 * r + 1, 2 * r + 1);
  for (std::size_t i = 0; i < kernel.rows(); ++i)
    for (std::size_t j = 0; j < kernel.cols(); ++j) kernel(i, j) = profile[i] * profile[j];
  return kernel;
}

}  // namespace

void OpticsConfig::validate() const {
  if (!(wavelength > 0) || !(pixel_pitch > 0) || !(propagation_distance > 0) || !(modulator_side > 0))
    fail(ErrorKind::Config, "optics: all lengths must be positive");
  if (oversampling == 0) fail(ErrorKind::Config, "optics: oversampling must be positive");
}

Psf delta_psf() { return Psf{}; }

Psf psf_from_kernel(RealGrid kernel) {
  require(kernel.rows() == kernel.cols() && kernel.rows() % 2 == 1, "psf kernel must be square with odd size");
  double total = 0.0;
  for (double v : kernel.storage()) {
    require(v >= 0.0 && std::isfinite(v), "psf kernel entries must be finite and nonnegative");
    total += v;
  }
  require(total > 0.0, "psf kernel must have positive mass");
  for (double& v : kernel.storage()) v /= total;
  Psf psf;
  psf.radius = kernel.rows() / 2;
  psf.kernel = std::move(kernel);
  return psf;
}

double slit_pixel_energy(const OpticsConfig& cfg, long k, std::size_t oversampling) {
  const double a = cfg.pixel_pitch;
  const double scale = std::sqrt(2.0 / (cfg.wavelength * cfg.propagation_distance));
  const double lo = (static_cast<double>(k) - 0.5) * a;
  const double step = a / static_cast<double>(oversampling);
  double acc = 0.0;
  for (std::size_t p = 0; p < oversampling; ++p) {
    const double center = lo + (static_cast<double>(p) + 0.5) * step;
    double panel = 0.0;
    for (std::size_t q = 0; q < kGlNodes.size(); ++q)
      panel += kGlWeights[q] * slit_intensity(center + 0.5 * step * kGlNodes[q], 0.5 * a, scale);
    acc += 0.5 * step * panel;
  }
  return acc;
}

Psf compute_psf(const OpticsConfig& cfg) {
  cfg.validate();
  Psf psf;
  psf.radius = cfg.kernel_radius;
  std::size_t level = cfg.oversampling;
  double fraction = 0.0;
  RealGrid previous = kernel_at(cfg, level, &fraction);
  while (true) {
    const std::size_t next_level = level * 2;
    if (next_level > kPsfMaxOversampling) {
      fail(ErrorKind::Numerical, "psf quadrature did not converge by oversampling " + std::to_string(level) +
                                     " (last change " + std::to_string(psf.convergence_delta) + ")");
    }
    double next_fraction = 0.0;
    RealGrid next = kernel_at(cfg, next_level, &next_fraction);
    double delta = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      delta = std::max(delta, std::abs(next.storage()[i] - previous.storage()[i]));
    psf.convergence_delta = delta;
    previous = std::move(next);
    fraction = next_fraction;
    level = next_level;
    if (delta <= kPsfConvergenceTol) break;
  }
  psf.kernel = std::move(previous);
  psf.energy_fraction = fraction;
  psf.oversampling = level;
  return psf;
}

RealGrid blur_pattern(const RealGrid& pattern, const Psf& psf) {
  const std::size_t k = psf.size();
  require(pattern.rows() >= k && pattern.cols() >= k, "blur_pattern: psf larger than pattern");
  const long r = static_cast<long>(psf.radius);
  const long rows = static_cast<long>(pattern.rows());
  const long cols = static_cast<long>(pattern.cols());
  RealGrid out(pattern.rows(), pattern.cols());
  for (long u = 0; u < rows; ++u)
    for (long v = 0; v < cols; ++v) {
      double acc = 0.0;
      for (long a = -r; a <= r; ++a) {
        const long pu = u - a;
        if (pu < 0 || pu >= rows) continue;
        for (long b = -r; b <= r; ++b) {
          const long pv = v - b;
          if (pv < 0 || pv >= cols) continue;
          acc += psf.at(a, b) * pattern(static_cast<std::size_t>(pu), static_cast<std::size_t>(pv));
        }
      }
      out(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) = acc;
    }
  return out;
}

std::string psf_hash(const Psf& psf) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (word >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(psf.radius);
  for (double v : psf.kernel.storage()) mix(std::bit_cast<std::uint64_t>(v));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shiftcam
