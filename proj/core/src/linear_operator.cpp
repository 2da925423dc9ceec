#include "shiftcam/linear_operator.hpp"

#include <cmath>

#include "shiftcam/error.hpp"
#include "shiftcam/rng.hpp"

namespace shiftcam {

std::vector<double> LinearOperator::forward(std::span<const double> image) const {
  require(image.size() == image_size(), "forward: image size mismatch");
  std::vector<double> out(measurement_count());
  apply(image, out);
  return out;
}

std::vector<double> LinearOperator::adjoint(std::span<const double> measurements) const {
  require(measurements.size() == measurement_count(), "adjoint: measurement count mismatch");
  std::vector<double> out(image_size());
  apply_adjoint(measurements, out);
  return out;
}

MatrixOperator::MatrixOperator(RealGrid matrix, std::size_t image_rows, std::size_t image_cols)
    : matrix_(std::move(matrix)), rows_(image_rows), cols_(image_cols) {
  require(matrix_.cols() == rows_ * cols_, "MatrixOperator: column count must equal image size");
}

void MatrixOperator::apply(std::span<const double> image, std::span<double> out) const {
  require(image.size() == image_size() && out.size() == measurement_count(), "MatrixOperator::apply: size mismatch");
  for (std::size_t r = 0; r < matrix_.rows(); ++r) out[r] = dot(matrix_.row(r), image);
}

void MatrixOperator::apply_adjoint(std::span<const double> measurements, std::span<double> out) const {
  require(measurements.size() == measurement_count() && out.size() == image_size(),
          "MatrixOperator::apply_adjoint: size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < matrix_.rows(); ++r) {
    const auto row = matrix_.row(r);
    const double y = measurements[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += y * row[c];
  }
}

DenseBipolarOperator::DenseBipolarOperator(std::size_t count, std::size_t image_rows, std::size_t image_cols,
                                           std::uint64_t seed)
    : count_(count), rows_(image_rows), cols_(image_cols), seed_(seed), signs_(count * image_rows * image_cols) {
  require(count > 0 && image_rows > 0 && image_cols > 0, "DenseBipolarOperator: empty dimensions");
  Xoshiro256 rng(seed);
  std::uint64_t word = 0;
  int bits_left = 0;
  for (auto& s : signs_) {
    if (bits_left == 0) {
      word = rng();
      bits_left = 64;
    }
    s = (word & 1U) ? std::int8_t{1} : std::int8_t{-1};
    word >>= 1;
    --bits_left;
  }
}

void DenseBipolarOperator::apply(std::span<const double> image, std::span<double> out) const {
  require(image.size() == image_size() && out.size() == count_, "DenseBipolarOperator::apply: size mismatch");
  const std::size_t n = image_size();
  for (std::size_t r = 0; r < count_; ++r) {
    const std::int8_t* row = signs_.data() + r * n;
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += static_cast<double>(row[c]) * image[c];
    out[r] = acc;
  }
}

void DenseBipolarOperator::apply_adjoint(std::span<const double> measurements, std::span<double> out) const {
  require(measurements.size() == count_ && out.size() == image_size(),
          "DenseBipolarOperator::apply_adjoint: size mismatch");
  const std::size_t n = image_size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < count_; ++r) {
    const std::int8_t* row = signs_.data() + r * n;
    const double y = measurements[r];
    for (std::size_t c = 0; c < n; ++c) out[c] += y * static_cast<double>(row[c]);
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

}  // namespace shiftcam
