#pragma once

namespace shiftcam {

struct FresnelCS {
  double c;
  double s;
};

/// Fresnel integrals C(x) = int_0^x cos(pi t^2 / 2) dt and
/// S(x) = int_0^x sin(pi t^2 / 2) dt, accurate to ~1e-15 absolute.
/// Power series for |x| <= 1.5, continued fraction for erfc beyond.
FresnelCS fresnel_integrals(double x) noexcept;

}  // namespace shiftcam
