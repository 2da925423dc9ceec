#include "shiftcam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shiftcam/error.hpp"
#include "shiftcam/rng.hpp"

namespace shiftcam {
namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

// D^T D z = -div(grad(z)), evaluated without temporaries for the two fields.
void laplacian_like(const RealGrid& z, RealGrid& out) {
  out = div(grad(z));
  for (double& v : out.storage()) v = -v;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_outer_iters == 0 || max_inner_iters == 0 || cg_iters == 0)
    fail(ErrorKind::Config, "solver: iteration caps must be positive");
  if (!(beta > 0) || !(mu > 0)) fail(ErrorKind::Config, "solver: penalties must be positive");
  if (!(continuation_factor > 1.0)) fail(ErrorKind::Config, "solver: continuation_factor must exceed 1");
  if (!(tol_rel_change > 0.0 && tol_rel_change < 1.0)) fail(ErrorKind::Config, "solver: tol must lie in (0, 1)");
}

std::size_t SolverConfig::stage_length() const noexcept {
  return std::max<std::size_t>(1, max_outer_iters / (continuation_steps + 1));
}

GradientField grad(const RealGrid& x) {
  const std::size_t m = x.rows(), n = x.cols();
  GradientField g{RealGrid(m, n), RealGrid(m, n)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i + 1 < m) g.dx(i, j) = x(i + 1, j) - x(i, j);
      if (j + 1 < n) g.dy(i, j) = x(i, j + 1) - x(i, j);
    }
  return g;
}

RealGrid div(const GradientField& w) {
  const std::size_t m = w.dx.rows(), n = w.dx.cols();
  RealGrid out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      if (i + 1 < m) v += w.dx(i, j);
      if (i > 0) v -= w.dx(i - 1, j);
      if (j + 1 < n) v += w.dy(i, j);
      if (j > 0) v -= w.dy(i, j - 1);
      out(i, j) = v;
    }
  return out;
}

double tv_norm(const RealGrid& x) {
  const GradientField g = grad(x);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += std::hypot(g.dx.storage()[k], g.dy.storage()[k]);
  return acc;
}

GradientField shrink2(const GradientField& v, double t) {
  require(t >= 0.0, "shrink2: threshold must be nonnegative");
  GradientField out{RealGrid(v.dx.rows(), v.dx.cols()), RealGrid(v.dy.rows(), v.dy.cols())};
  for (std::size_t k = 0; k < v.dx.size(); ++k) {
    const double a = v.dx.storage()[k], b = v.dy.storage()[k];
    const double s = std::hypot(a, b);
    if (s == 0.0) continue;
    const double f = std::max(s - t, 0.0) / s;
    out.dx.storage()[k] = a * f;
    out.dy.storage()[k] = b * f;
  }
  return out;
}

double estimate_operator_norm(const LinearOperator& op, std::size_t iterations) {
  std::vector<double> v(op.image_size());
  Xoshiro256 rng(0x5eed);
  for (double& x : v) x = rng.uniform() - 0.5;
  double sigma2 = 0.0;
  std::vector<double> av(op.measurement_count());
  std::vector<double> w(op.image_size());
  for (std::size_t it = 0; it < iterations; ++it) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    op.apply(v, av);
    op.apply_adjoint(av, w);
    sigma2 = dot(v, w);
    v.swap(w);
  }
  return std::sqrt(std::max(sigma2, 0.0));
}

ReconResult reconstruct(const LinearOperator& op, std::span<const double> y, const SolverConfig& cfg) {
  cfg.validate();
  const std::size_t m = op.image_rows(), n = op.image_cols(), count = op.measurement_count();
  if (y.empty() || count == 0) fail(ErrorKind::InvalidArgument, "reconstruct: no measurements");
  if (y.size() != count)
    fail(ErrorKind::InvalidArgument, "reconstruct: " + std::to_string(y.size()) + " measurements, operator expects " +
                                         std::to_string(count));

  if (!all_finite(y)) fail(ErrorKind::Numerical, "reconstruct: measurements contain NaN or infinity");

  ReconResult result;
  result.image = ImagePlane(m, n);
  const double y_norm = norm2(y);
  if (y_norm == 0.0) return result;  // x = 0 is feasible and has zero TV

  const double op_norm = estimate_operator_norm(op);
  if (!(op_norm > 0.0)) fail(ErrorKind::Numerical, "reconstruct: operator has zero norm");
  const double scale = 1.0 / op_norm;
  std::vector<double> b(y.begin(), y.end());
  for (double& v : b) v *= scale;

  double beta = cfg.beta;
  double mu = cfg.mu;
  RealGrid& x = result.image;
  GradientField u{RealGrid(m, n), RealGrid(m, n)};  // scaled multiplier of w = grad x
  std::vector<double> v(count, 0.0);                 // scaled multiplier of Ax = b
  std::vector<double> ax(count, 0.0);                // scaled A x
  GradientField w{RealGrid(m, n), RealGrid(m, n)};

  RealGrid rhs(m, n), r(m, n), p(m, n), hp(m, n), tmp(m, n), x_prev(m, n), x_outer(m, n);
  std::vector<double> ap(count), resid(count);

  auto apply_scaled = [&](const RealGrid& img, std::span<double> out) {
    op.apply(img.values(), out);
    for (double& e : out) e *= scale;
  };
  auto adjoint_scaled = [&](std::span<const double> meas, RealGrid& out) {
    op.apply_adjoint(meas, out.values());
    for (double& e : out.storage()) e *= scale;
  };

  const std::size_t stage_len = cfg.stage_length();
  std::size_t steps_done = 0;

  for (std::size_t outer = 0; outer < cfg.max_outer_iters; ++outer) {
    x_outer = x;
    for (std::size_t inner = 0; inner < cfg.max_inner_iters; ++inner) {
      x_prev = x;
      // w-step
      GradientField gx = grad(x);
      for (std::size_t k = 0; k < x.size(); ++k) {
        gx.dx.storage()[k] += u.dx.storage()[k];
        gx.dy.storage()[k] += u.dy.storage()[k];
      }
      w = shrink2(gx, 1.0 / beta);

      // x-step: CG on (beta D^T D + mu A^T A) x = beta D^T (w - u) + mu A^T (b - v)
      // r = beta D^T (w - u - Dx) + mu A^T (b - v - Ax)
      GradientField gcur = grad(x);
      GradientField t{RealGrid(m, n), RealGrid(m, n)};
      for (std::size_t k = 0; k < x.size(); ++k) {
        t.dx.storage()[k] = w.dx.storage()[k] - u.dx.storage()[k] - gcur.dx.storage()[k];
        t.dy.storage()[k] = w.dy.storage()[k] - u.dy.storage()[k] - gcur.dy.storage()[k];
      }
      r = div(t);
      for (double& e : r.storage()) e *= -beta;
      for (std::size_t k = 0; k < count; ++k) resid[k] = b[k] - v[k] - ax[k];
      adjoint_scaled(resid, tmp);
      axpy(mu, tmp.values(), r.values());

      p = r;
      double rr = dot(r.values(), r.values());
      for (std::size_t it = 0; it < cfg.cg_iters && rr > 0.0; ++it) {
        laplacian_like(p, hp);
        for (double& e : hp.storage()) e *= beta;
        apply_scaled(p, ap);
        adjoint_scaled(ap, tmp);
        axpy(mu, tmp.values(), hp.values());
        const double php = dot(p.values(), hp.values());
        if (!(php > 0.0)) break;
        const double alpha = rr / php;
        axpy(alpha, p.values(), x.values());
        axpy(alpha, ap, ax);
        axpy(-alpha, hp.values(), r.values());
        const double rr_next = dot(r.values(), r.values());
        const double ratio = rr_next / rr;
        for (std::size_t k = 0; k < p.size(); ++k) p.storage()[k] = r.storage()[k] + ratio * p.storage()[k];
        rr = rr_next;
      }
      if (cfg.nonneg) {
        bool clamped = false;
        for (double& e : x.storage())
          if (e < 0.0) {
            e = 0.0;
            clamped = true;
          }
        if (clamped) apply_scaled(x, ax);
      }
      if (!all_finite(x.values())) {
        std::ostringstream msg;
        msg << "reconstruct: non-finite iterate at outer iteration " << outer << ", inner " << inner << "; trace:";
        for (const auto& row : result.trace)
          msg << " (" << row.iteration << ", obj=" << row.objective << ", res=" << row.residual << ")";
        fail(ErrorKind::Numerical, msg.str());
      }
      double diff = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) diff += (x.storage()[k] - x_prev.storage()[k]) * (x.storage()[k] - x_prev.storage()[k]);
      const double xn = norm2(x.values());
      if (std::sqrt(diff) <= cfg.tol_rel_change * std::max(xn, 1e-300)) break;
    }

    // multipliers
    const GradientField gx = grad(x);
    double split_sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double ex = gx.dx.storage()[k] - w.dx.storage()[k];
      const double ey = gx.dy.storage()[k] - w.dy.storage()[k];
      u.dx.storage()[k] += ex;
      u.dy.storage()[k] += ey;
      split_sq += ex * ex + ey * ey;
    }
    double fit_sq = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const double e = ax[k] - b[k];
      v[k] += e;
      fit_sq += e * e;
    }

    TraceRow row;
    row.iteration = outer + 1;
    row.objective = tv_norm(x) + 0.5 * beta * split_sq + 0.5 * mu * fit_sq;
    row.residual = std::sqrt(fit_sq) / (scale * y_norm);
    result.trace.push_back(row);
    result.objective_trace.push_back(row.objective);
    result.iterations = outer + 1;

    double diff = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) diff += (x.storage()[k] - x_outer.storage()[k]) * (x.storage()[k] - x_outer.storage()[k]);
    const bool settled = std::sqrt(diff) <= cfg.tol_rel_change * std::max(norm2(x.values()), 1e-300);

    if ((outer + 1) % stage_len == 0 && steps_done < cfg.continuation_steps) {
      result.stage_ends.push_back(result.trace.size() - 1);
      beta *= cfg.continuation_factor;
      mu *= cfg.continuation_factor;
      for (double& e : u.dx.storage()) e /= cfg.continuation_factor;
      for (double& e : u.dy.storage()) e /= cfg.continuation_factor;
      for (double& e : v) e /= cfg.continuation_factor;
      ++steps_done;
    } else if (settled && steps_done >= cfg.continuation_steps) {
      break;
    }
  }
  result.stage_ends.push_back(result.trace.size() - 1);

  std::vector<double> fx(count);
  op.apply(x.values(), fx);
  for (std::size_t k = 0; k < count; ++k) fx[k] -= y[k];
  result.final_residual = norm2(fx) / y_norm;
  return result;
}

}  // namespace shiftcam
