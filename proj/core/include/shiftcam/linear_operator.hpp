#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shiftcam/grid.hpp"

namespace shiftcam {

/// Forward/adjoint pair mapping an image (row-major, image_rows x image_cols)
/// to a measurement vector. This is the only view of the sensing process the
/// solver gets.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::size_t image_rows() const noexcept = 0;
  virtual std::size_t image_cols() const noexcept = 0;
  virtual std::size_t measurement_count() const noexcept = 0;

  virtual void apply(std::span<const double> image, std::span<double> out) const = 0;
  virtual void apply_adjoint(std::span<const double> measurements, std::span<double> out) const = 0;

  std::size_t image_size() const noexcept { return image_rows() * image_cols(); }
  std::vector<double> forward(std::span<const double> image) const;
  std::vector<double> adjoint(std::span<const double> measurements) const;
};

/// Explicit dense matrix (rows = measurements, row-major).
class MatrixOperator final : public LinearOperator {
 public:
  MatrixOperator(RealGrid matrix, std::size_t image_rows, std::size_t image_cols);

  std::size_t image_rows() const noexcept override { return rows_; }
  std::size_t image_cols() const noexcept override { return cols_; }
  std::size_t measurement_count() const noexcept override { return matrix_.rows(); }
  void apply(std::span<const double> image, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> measurements, std::span<double> out) const override;

  const RealGrid& matrix() const noexcept { return matrix_; }

 private:
  RealGrid matrix_;
  std::size_t rows_;
  std::size_t cols_;
};

/// i.i.d. +-1 rows drawn from a seeded stream; models a sequential
/// single-pixel camera. Entries stored as int8 (the 4096 x 16384 case is
/// 64 MiB instead of 512 MiB as doubles).
class DenseBipolarOperator final : public LinearOperator {
 public:
  DenseBipolarOperator(std::size_t count, std::size_t image_rows, std::size_t image_cols, std::uint64_t seed);

  std::size_t image_rows() const noexcept override { return rows_; }
  std::size_t image_cols() const noexcept override { return cols_; }
  std::size_t measurement_count() const noexcept override { return count_; }
  void apply(std::span<const double> image, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> measurements, std::span<double> out) const override;

  std::int8_t entry(std::size_t row, std::size_t col) const noexcept { return signs_[row * rows_ * cols_ + col]; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::size_t count_;
  std::size_t rows_;
  std::size_t cols_;
  std::uint64_t seed_;
  std::vector<std::int8_t> signs_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;

}  // namespace shiftcam
