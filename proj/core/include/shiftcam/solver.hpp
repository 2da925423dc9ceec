#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shiftcam/grid.hpp"
#include "shiftcam/linear_operator.hpp"

namespace shiftcam {

struct SolverConfig {
  std::size_t max_outer_iters = 40;  // multiplier updates
  std::size_t max_inner_iters = 20;  // shrink / x-update alternations per outer iteration
  std::size_t cg_iters = 3;          // conjugate-gradient steps per x-update
  double beta = 32.0;                // gradient-splitting penalty
  double mu = 256.0;                 // data-fidelity penalty (operator scaled to unit norm)
  double continuation_factor = 2.0;
  std::size_t continuation_steps = 4;
  double tol_rel_change = 1e-4;
  bool nonneg = true;

  void validate() const;
  /// Outer iterations between two continuation steps.
  std::size_t stage_length() const noexcept;
};

/// Forward differences along rows (dx) and columns (dy); zero in the last
/// row of dx and the last column of dy.
struct GradientField {
  RealGrid dx;
  RealGrid dy;
};

GradientField grad(const RealGrid& x);
/// Negative adjoint of grad: <grad(x), w> = -<x, div(w)>.
RealGrid div(const GradientField& w);
/// Isotropic TV with the same boundary rule as grad.
double tv_norm(const RealGrid& x);
/// Per-pixel vector soft threshold: v * max(|v| - t, 0) / |v|.
GradientField shrink2(const GradientField& v, double t);

struct TraceRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double residual = 0.0;
};

struct ReconResult {
  ImagePlane image;
  std::size_t iterations = 0;
  double final_residual = 0.0;  // ||Ax - y|| / ||y||
  std::vector<double> objective_trace;
  std::vector<TraceRow> trace;
  /// Index into `trace` of the last iteration of each continuation stage.
  std::vector<std::size_t> stage_ends;
};

/// min TV(x) s.t. Ax = y by an augmented Lagrangian with the splitting
/// w = grad(x). Each outer iteration alternates a shrink step for w and a
/// few CG steps on the x quadratic, then updates both multipliers. The
/// operator is rescaled to unit spectral norm (power iteration) so penalties
/// are comparable across operators. Throws ErrorKind::Numerical on NaN.
ReconResult reconstruct(const LinearOperator& op, std::span<const double> y, const SolverConfig& cfg);

/// Largest singular value of op by power iteration from a fixed start vector.
double estimate_operator_norm(const LinearOperator& op, std::size_t iterations = 30);

}  // namespace shiftcam
