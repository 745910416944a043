#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"

namespace grasspool {

enum class BetaRule { PolakRibierePlus, FletcherReeves };

enum class Termination { GradTol, MaxIters, LineSearchFail };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradTol: return "grad_tol";
    case Termination::MaxIters: return "max_iters";
    case Termination::LineSearchFail: return "line_search_fail";
  }
  return "unknown";
}

struct CgOptions {
  int max_iters = 100;
  double grad_tol = 1e-6;
  double armijo_c = 1e-4;      // sufficient-decrease constant
  double armijo_shrink = 0.5;  // backtracking factor
  double initial_step = 1.0;
  BetaRule beta_rule = BetaRule::PolakRibierePlus;
  int restart_every = 0;  // 0 = automatic (p * d)

  void validate() const {
    if (max_iters < 1) throw Error("CgOptions: max_iters must be >= 1");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
      throw Error("CgOptions: armijo_shrink must lie in (0, 1)");
    }
    if (!(grad_tol > 0.0)) throw Error("CgOptions: grad_tol must be > 0");
  }
};

// Per-run record: one objective value per accepted iterate (the start point
// included), so objective_values.size() == iterations_run + 1.
struct OptTrace {
  std::vector<double> objective_values;
  std::vector<double> grad_norms;
  int iterations_run = 0;
  Termination termination = Termination::MaxIters;
};

using Objective = std::function<double(const StiefelPoint&)>;
using EuclideanGradient = std::function<Eigen::MatrixXd(const StiefelPoint&)>;

struct CgResult {
  StiefelPoint point;
  OptTrace trace;
};

namespace detail {

inline double checked_objective(const Objective& f, const StiefelPoint& u) {
  const double v = f(u);
  if (!std::isfinite(v)) {
    throw CallbackFailure("cg_minimize: objective returned " +
                          std::to_string(v));
  }
  return v;
}

inline Eigen::MatrixXd checked_gradient(const EuclideanGradient& g,
                                        const StiefelPoint& u) {
  Eigen::MatrixXd m = g(u);
  if (!m.allFinite()) {
    throw CallbackFailure("cg_minimize: gradient returned NaN/Inf entries");
  }
  return m;
}

}  // namespace detail

// Conjugate gradient on the Grassmannian. `f` is the cost, `g` returns the
// Euclidean matrix of partial derivatives; the Riemannian gradient is its
// horizontal projection. Steps are chosen by Armijo backtracking along the
// QR-retracted curve, and previous directions are combined after projection
// transport. Polak-Ribiere+ (clamped at zero) is the default beta rule.
inline CgResult cg_minimize(const Objective& f, const EuclideanGradient& g,
                            const StiefelPoint& u0,
                            const CgOptions& opts = {}) {
  opts.validate();
  const int restart =
      opts.restart_every > 0
          ? opts.restart_every
          : static_cast<int>(u0.ambient_dim() * u0.subspace_dim());
  constexpr int kMaxShrinks = 50;

  StiefelPoint u = u0;
  double f_val = detail::checked_objective(f, u);
  TangentVector grad = project_tangent(u, detail::checked_gradient(g, u));
  double grad_norm = grad.norm();

  OptTrace trace;
  trace.objective_values.push_back(f_val);
  trace.grad_norms.push_back(grad_norm);

  TangentVector dir(-grad.matrix, u);
  int since_restart = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (grad_norm <= opts.grad_tol) {
      trace.termination = Termination::GradTol;
      return {u, trace};
    }

    double slope = grad.matrix.cwiseProduct(dir.matrix).sum();
    if (slope >= 0.0) {
      // not a descent direction; fall back to steepest descent
      dir = TangentVector(-grad.matrix, u);
      slope = -grad_norm * grad_norm;
      since_restart = 0;
    }

    // Armijo backtracking on the retracted curve; a failed conjugate
    // direction gets one retry along steepest descent before giving up
    bool accepted = false;
    StiefelPoint u_next = u;
    double f_next = f_val;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = opts.initial_step;
      for (int shrink = 0; shrink <= kMaxShrinks; ++shrink) {
        StiefelPoint candidate = retract(u, dir, step);
        const double f_cand = detail::checked_objective(f, candidate);
        if (f_cand <= f_val + opts.armijo_c * step * slope) {
          u_next = candidate;
          f_next = f_cand;
          accepted = true;
          break;
        }
        step *= opts.armijo_shrink;
      }
      if (accepted || since_restart == 0) break;  // already steepest descent
      dir = TangentVector(-grad.matrix, u);
      slope = -grad_norm * grad_norm;
      since_restart = 0;
    }
    if (!accepted) {
      trace.termination = Termination::LineSearchFail;
      return {u, trace};
    }

    TangentVector grad_next =
        project_tangent(u_next, detail::checked_gradient(g, u_next));
    const double grad_next_norm = grad_next.norm();

    ++since_restart;
    double beta = 0.0;
    if (since_restart < restart) {
      const double denom = grad_norm * grad_norm;
      if (denom > 0.0) {
        if (opts.beta_rule == BetaRule::PolakRibierePlus) {
          const TangentVector grad_moved = transport(u, u_next, grad);
          const double num = grad_next.matrix
                                 .cwiseProduct(grad_next.matrix -
                                               grad_moved.matrix)
                                 .sum();
          beta = std::max(0.0, num / denom);
        } else {
          beta = grad_next_norm * grad_next_norm / denom;
        }
      }
    } else {
      since_restart = 0;
    }

    if (beta == 0.0) {
      dir = TangentVector(-grad_next.matrix, u_next);
    } else {
      const TangentVector dir_moved = transport(u, u_next, dir);
      dir = project_tangent(u_next,
                            -grad_next.matrix + beta * dir_moved.matrix);
    }

    u = u_next;
    f_val = f_next;
    grad = grad_next;
    grad_norm = grad_next_norm;
    trace.objective_values.push_back(f_val);
    trace.grad_norms.push_back(grad_norm);
    trace.iterations_run = iter + 1;
  }

  trace.termination = grad_norm <= opts.grad_tol ? Termination::GradTol
                                                 : Termination::MaxIters;
  return {u, trace};
}

}  // namespace grasspool
