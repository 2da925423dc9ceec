#include "shiftcam/correlator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "shiftcam/error.hpp"

namespace shiftcam {
namespace {

// FFTW's planner is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

}  // namespace

struct Correlator::Plans {
  std::size_t rows = 0;   // 2m
  std::size_t cols = 0;   // 2n
  std::size_t half = 0;   // 2n/2 + 1
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  FftwBuffer<fftw_complex> spectrum;  // conj-free spectrum of the pattern

  std::size_t real_size() const noexcept { return rows * cols; }
  std::size_t complex_size() const noexcept { return rows * half; }

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

Correlator::Correlator(const RealGrid& pattern, std::size_t m, std::size_t n)
    : m_(m), n_(n), plans_(std::make_unique<Plans>()) {
  require(m > 0 && n > 0, "Correlator: empty image dimensions");
  require(pattern.rows() == 2 * m && pattern.cols() == 2 * n, "Correlator: pattern must be (2m x 2n)");
  Plans& p = *plans_;
  p.rows = 2 * m;
  p.cols = 2 * n;
  p.half = p.cols / 2 + 1;
  auto real = fftw_buffer<double>(p.real_size());
  p.spectrum = fftw_buffer<fftw_complex>(p.complex_size());
  {
    std::lock_guard lock(planner_mutex());
    p.r2c = fftw_plan_dft_r2c_2d(static_cast<int>(p.rows), static_cast<int>(p.cols), real.get(), p.spectrum.get(),
                                 FFTW_ESTIMATE);
    p.c2r = fftw_plan_dft_c2r_2d(static_cast<int>(p.rows), static_cast<int>(p.cols), p.spectrum.get(), real.get(),
                                 FFTW_ESTIMATE);
  }
  if (!p.r2c || !p.c2r) fail(ErrorKind::Numerical, "Correlator: FFTW planning failed");
  std::copy(pattern.storage().begin(), pattern.storage().end(), real.get());
  fftw_execute_dft_r2c(p.r2c, real.get(), p.spectrum.get());
}

Correlator::~Correlator() = default;

void Correlator::correlate(std::span<const double> z, std::span<double> out) const {
  require(z.size() == m_ * n_ && out.size() == m_ * n_, "Correlator::correlate: size mismatch");
  const Plans& p = *plans_;
  auto real = fftw_buffer<double>(p.real_size());
  auto freq = fftw_buffer<fftw_complex>(p.complex_size());
  std::fill(real.get(), real.get() + p.real_size(), 0.0);
  for (std::size_t r = 0; r < m_; ++r) std::copy_n(z.data() + r * n_, n_, real.get() + r * p.cols);
  fftw_execute_dft_r2c(p.r2c, real.get(), freq.get());
  // Correlation theorem: F^-1{ F(pattern) * conj(F(z)) }.
  for (std::size_t k = 0; k < p.complex_size(); ++k) {
    const double ar = p.spectrum[k][0], ai = p.spectrum[k][1];
    const double br = freq[k][0], bi = -freq[k][1];
    freq[k][0] = ar * br - ai * bi;
    freq[k][1] = ar * bi + ai * br;
  }
  fftw_execute_dft_c2r(p.c2r, freq.get(), real.get());
  const double scale = 1.0 / static_cast<double>(p.real_size());
  for (std::size_t r = 0; r < m_; ++r)
    for (std::size_t c = 0; c < n_; ++c) out[r * n_ + c] = real[r * p.cols + c] * scale;
}

}  // namespace shiftcam
