#include "shiftcam/fresnel.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace shiftcam {
namespace {

constexpr double kEps = 1e-16;
constexpr double kFpMin = 1e-300;
constexpr int kMaxIter = 200;
constexpr double kSeriesLimit = 1.5;

FresnelCS series(double ax) noexcept {
  const double fact = std::numbers::pi / 2.0 * ax * ax;
  double sum = 0.0;
  double sum_s = 0.0;
  double sum_c = ax;
  double sign = 1.0;
  double term = ax;
  bool odd = true;
  int n = 3;
  for (int k = 1; k <= kMaxIter; ++k) {
    term *= fact / k;
    sum += sign * term / n;
    const double test = std::abs(sum) * kEps;
    if (odd) {
      sign = -sign;
      sum_s = sum;
      sum = sum_c;
    } else {
      sum_c = sum;
      sum = sum_s;
    }
    if (term < test) break;
    odd = !odd;
    n += 2;
  }
  return {sum_c, sum_s};
}

// Modified Lentz evaluation of the erfc continued fraction.
FresnelCS continued_fraction(double ax) noexcept {
  using cd = std::complex<double>;
  const double pix2 = std::numbers::pi * ax * ax;
  cd b(1.0, -pix2);
  cd cc(1.0 / kFpMin, 0.0);
  cd d = 1.0 / b;
  cd h = d;
  int n = -1;
  for (int k = 2; k <= kMaxIter; ++k) {
    n += 2;
    const double a = -static_cast<double>(n * (n + 1));
    b += 4.0;
    d = 1.0 / (a * d + b);
    cc = b + a / cc;
    const cd del = cc * d;
    h *= del;
    if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < kEps) break;
  }
  h *= cd(ax, -ax);
  const cd cs = cd(0.5, 0.5) * (1.0 - cd(std::cos(0.5 * pix2), std::sin(0.5 * pix2)) * h);
  return {cs.real(), cs.imag()};
}

}  // namespace

FresnelCS fresnel_integrals(double x) noexcept {
  const double ax = std::abs(x);
  FresnelCS r{};
  if (ax < std::sqrt(kFpMin)) {
    r = {ax, 0.0};
  } else if (ax <= kSeriesLimit) {
    r = series(ax);
  } else {
    r = continued_fraction(ax);
  }
  if (x < 0.0) {
    r.c = -r.c;
    r.s = -r.s;
  }
  return r;
}

}  // namespace shiftcam
