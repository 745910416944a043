#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "grasspool/baselines.hpp"
#include "grasspool/cg.hpp"
#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"
#include "grasspool/sequence.hpp"

namespace grasspool {

enum class GrpInit { Pca, RandomSeeded };

struct GrpParams {
  Eigen::Index p = 2;     // subspace dimension
  double eta = 0.1;       // ordering margin
  double lambda = 10.0;   // hinge weight
  bool use_slack = false;
  double slack_c = 1.0;   // only used with use_slack
  CgOptions cg;
  GrpInit init = GrpInit::Pca;
  std::uint64_t seed = 0;  // for RandomSeeded init (and PCA fallback)

  // Slack variables can be eliminated per pair: minimizing
  // C*xi + (w/2)*max(0, m - xi) over xi >= 0 caps the effective hinge
  // weight at min(w, 2C). Slack-free mode keeps the weight at lambda.
  double hinge_weight() const {
    return use_slack ? std::min(lambda, 2.0 * slack_c) : lambda;
  }

  void validate(Eigen::Index d) const {
    if (p < 1 || p > d) {
      throw ShapeMismatch("GrpParams: need 1 <= p <= d, got p=" +
                          std::to_string(p) + " d=" + std::to_string(d));
    }
    if (!(eta >= 0.0)) throw Error("GrpParams: eta must be >= 0");
    if (!(lambda > 0.0)) throw Error("GrpParams: lambda must be > 0");
    if (use_slack && !(slack_c > 0.0)) {
      throw Error("GrpParams: slack_c must be > 0");
    }
    cg.validate();
  }
};

struct SubspaceDescriptor {
  StiefelPoint point;
  GrpParams params_used;
  double final_objective = 0.0;
  double constraints_satisfied_fraction = 0.0;
  int iterations_run = 0;
  Termination termination = Termination::MaxIters;
  std::vector<std::string> warnings;
};

// Binary strictly-upper-triangular indicator of ordered pairs that violate
// the margin, plus the per-frame net violation counts nu_i (row sum minus
// column sum), which weight the fast gradient.
struct ViolationMatrix {
  Eigen::MatrixXi entries;  // n x n, entries(i,j) in {0,1}, zero for j <= i
  Eigen::VectorXi nu;

  Eigen::Index violated_pairs() const { return entries.sum(); }
};

namespace detail {

// Projection energies |U'x_i|^2 for every frame, via the n x p product.
inline Eigen::VectorXd projection_energies(const StiefelPoint& u,
                                           const FeatureSequence& x) {
  return (x.frames * u.matrix()).rowwise().squaredNorm();
}

inline void check_grp_shapes(const StiefelPoint& u, const FeatureSequence& x,
                             const GrpParams& params, const char* who) {
  if (u.ambient_dim() != x.dim()) {
    throw ShapeMismatch(std::string(who) + ": U has d=" +
                        std::to_string(u.ambient_dim()) + " but frames have d=" +
                        std::to_string(x.dim()));
  }
  if (u.subspace_dim() != params.p) {
    throw ShapeMismatch(std::string(who) + ": U has p=" +
                        std::to_string(u.subspace_dim()) +
                        " but params.p=" + std::to_string(params.p));
  }
  if (!x.frames.allFinite()) {
    throw NonFinite(std::string(who) + ": frames contain NaN/Inf");
  }
}

}  // namespace detail

// V_ij = 1 iff i < j and |U'x_j|^2 - |U'x_i|^2 <= eta - xi_ij. Slack matrix
// optional (xi = 0 when absent).
inline ViolationMatrix violation_matrix(const StiefelPoint& u,
                                        const FeatureSequence& x, double eta,
                                        const Eigen::MatrixXd* slack = nullptr) {
  if (u.ambient_dim() != x.dim()) {
    throw ShapeMismatch("violation_matrix: dimension mismatch");
  }
  const Eigen::Index n = x.length();
  if (slack && (slack->rows() != n || slack->cols() != n)) {
    throw ShapeMismatch("violation_matrix: slack matrix must be n x n");
  }
  const Eigen::VectorXd e = detail::projection_energies(u, x);
  ViolationMatrix v;
  v.entries = Eigen::MatrixXi::Zero(n, n);
  v.nu = Eigen::VectorXi::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double xi = slack ? (*slack)(i, j) : 0.0;
      if (e(j) - e(i) <= eta - xi) {
        v.entries(i, j) = 1;
        v.nu(i) += 1;
        v.nu(j) -= 1;
      }
    }
  }
  return v;
}

// GRP cost:
//   1/2 sum_i (|x_i|^2 - |U'x_i|^2)  +  w/2 sum_{i<j} max(0, e_i - e_j + eta)
// with w the (slack-eliminated) hinge weight. The reconstruction term uses
// the idempotence of I - UU', so no d x d projector is formed.
inline double grp_objective(const StiefelPoint& u, const FeatureSequence& x,
                            const GrpParams& params) {
  detail::check_grp_shapes(u, x, params, "grp_objective");
  const Eigen::Index n = x.length();
  const Eigen::VectorXd e = detail::projection_energies(u, x);
  const double reconstruction =
      0.5 * (x.frames.rowwise().squaredNorm().sum() - e.sum());
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      hinge += std::max(0.0, e(i) - e(j) + params.eta);
    }
  }
  return reconstruction + 0.5 * params.hinge_weight() * hinge;
}

// Euclidean gradient via explicit d x d accumulation:
//   [ w * sum_{violating (i,j)} (x_i x_i' - x_j x_j')  -  X'X ] U.
// Reference route; cost O(d^2 #violations + n d^2 + d^2 p). Pairs exactly at
// the hinge kink contribute nothing (subgradient 0 there).
inline Eigen::MatrixXd grp_gradient_naive(const StiefelPoint& u,
                                          const FeatureSequence& x,
                                          const GrpParams& params) {
  detail::check_grp_shapes(u, x, params, "grp_gradient_naive");
  const Eigen::Index n = x.length();
  const Eigen::Index d = x.dim();
  const Eigen::VectorXd e = detail::projection_energies(u, x);

  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (e(i) - e(j) + params.eta > 0.0) {
        accum += x.frames.row(i).transpose() * x.frames.row(i);
        accum -= x.frames.row(j).transpose() * x.frames.row(j);
      }
    }
  }
  const Eigen::MatrixXd scatter = x.frames.transpose() * x.frames;
  return (params.hinge_weight() * accum - scatter) * u.matrix();
}

// Same gradient through the violation counts, never forming a d x d matrix:
//   X' * diag(w * nu - 1) * (X U),   cost O(ndp + n^2).
inline Eigen::MatrixXd grp_gradient_fast(const StiefelPoint& u,
                                         const FeatureSequence& x,
                                         const GrpParams& params) {
  detail::check_grp_shapes(u, x, params, "grp_gradient_fast");
  const Eigen::Index n = x.length();
  const Eigen::MatrixXd proj = x.frames * u.matrix();  // n x p
  const Eigen::VectorXd e = proj.rowwise().squaredNorm();

  Eigen::VectorXd weight = Eigen::VectorXd::Constant(n, -1.0);
  const double w = params.hinge_weight();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (e(i) - e(j) + params.eta > 0.0) {
        weight(i) += w;
        weight(j) -= w;
      }
    }
  }
  return x.frames.transpose() * (proj.array().colwise() * weight.array()).matrix();
}

// Both evaluation routes of the idempotence identity
//   |x - UU'x|^2 == trace(xx'(I - UU')),
// the right side deliberately through the full d x d projector.
inline std::pair<double, double> reconstruction_identity_check(
    const StiefelPoint& u, const Eigen::VectorXd& x) {
  if (x.size() != u.ambient_dim()) {
    throw ShapeMismatch("reconstruction_identity_check: dimension mismatch");
  }
  const Eigen::VectorXd residual = x - u.matrix() * (u.matrix().transpose() * x);
  const double lhs = residual.squaredNorm();
  const Eigen::Index d = u.ambient_dim();
  const Eigen::MatrixXd projector =
      Eigen::MatrixXd::Identity(d, d) - u.matrix() * u.matrix().transpose();
  const double rhs = (x * x.transpose() * projector).trace();
  return {lhs, rhs};
}

namespace detail {

inline StiefelPoint random_stiefel(Eigen::Index d, Eigen::Index p,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(d, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = gauss(rng);
  }
  return orthonormalize(m);
}

inline StiefelPoint grp_init_point(const FeatureSequence& x,
                                   const GrpParams& params,
                                   std::vector<std::string>* warnings) {
  if (params.init == GrpInit::Pca) {
    try {
      return pca_subspace(x, params.p);
    } catch (const RankDeficient& err) {
      if (warnings) {
        warnings->push_back(std::string("pca init failed (") + err.what() +
                            "); falling back to random seeded init");
      }
    }
  }
  return random_stiefel(x.dim(), params.p, params.seed);
}

// Solve min F(U) for already-preprocessed frames (no normalization here).
inline CgResult solve_grp(const FeatureSequence& x, const GrpParams& params,
                          const StiefelPoint& u0) {
  const Objective f = [&x, &params](const StiefelPoint& u) {
    return grp_objective(u, x, params);
  };
  const EuclideanGradient g = [&x, &params](const StiefelPoint& u) {
    return grp_gradient_fast(u, x, params);
  };
  return cg_minimize(f, g, u0, params.cg);
}

inline double satisfied_fraction(const StiefelPoint& u,
                                 const FeatureSequence& x, double eta) {
  const Eigen::Index n = x.length();
  const Eigen::Index total = n * (n - 1) / 2;
  if (total == 0) return 1.0;
  const ViolationMatrix v = violation_matrix(u, x, eta);
  return 1.0 - static_cast<double>(v.violated_pairs()) /
                   static_cast<double>(total);
}

}  // namespace detail

// Pool one sequence into a subspace descriptor: normalize rows if needed,
// warm-start (PCA by default), then run Riemannian CG on the GRP cost with
// the fast gradient. The optional trace captures every accepted iterate.
inline SubspaceDescriptor pool_grp(const FeatureSequence& x,
                                   const GrpParams& params,
                                   OptTrace* trace_out = nullptr) {
  if (x.length() < 2) {
    throw DegenerateSequence("pool_grp: need n >= 2 frames, got " +
                             std::to_string(x.length()));
  }
  params.validate(x.dim());
  const FeatureSequence xn = x.normalized ? x : normalize_rows(x);

  std::vector<std::string> warnings;
  const StiefelPoint u0 = detail::grp_init_point(xn, params, &warnings);
  CgResult result = detail::solve_grp(xn, params, u0);
  if (trace_out) *trace_out = result.trace;

  SubspaceDescriptor desc{std::move(result.point), params, 0.0, 0.0,
                          0, Termination::MaxIters, {}};
  desc.final_objective = result.trace.objective_values.back();
  desc.constraints_satisfied_fraction =
      detail::satisfied_fraction(desc.point, xn, params.eta);
  desc.iterations_run = result.trace.iterations_run;
  desc.termination = result.trace.termination;
  desc.warnings = std::move(warnings);
  return desc;
}

// Greedy variant: estimate one direction at a time against the deflated
// features x_i - U (U' x_i), which keeps each 1-d subproblem orthogonal to
// the columns found so far; stack and re-orthonormalize at the end.
inline SubspaceDescriptor pool_grp_incremental(const FeatureSequence& x,
                                               const GrpParams& params) {
  if (x.length() < 2) {
    throw DegenerateSequence("pool_grp_incremental: need n >= 2 frames");
  }
  params.validate(x.dim());
  const FeatureSequence xn = x.normalized ? x : normalize_rows(x);
  const Eigen::Index d = xn.dim();

  std::vector<std::string> warnings;
  Eigen::MatrixXd columns(d, params.p);
  int total_iterations = 0;
  Termination last_termination = Termination::GradTol;

  for (Eigen::Index q = 0; q < params.p; ++q) {
    GrpParams stage = params;
    stage.p = 1;

    FeatureSequence deflated = xn;
    if (q > 0) {
      const auto u_prev = columns.leftCols(q);
      deflated.frames -= (xn.frames * u_prev) * u_prev.transpose();
    }

    const auto random_in_complement = [&]() {
      Eigen::VectorXd r =
          detail::random_stiefel(d, 1,
                                 stage.seed + static_cast<std::uint64_t>(q))
              .matrix();
      if (q > 0) {
        const auto u_prev = columns.leftCols(q);
        r -= u_prev * (u_prev.transpose() * r);
      }
      return StiefelPoint(r / r.norm());
    };
    StiefelPoint u0q = [&]() {
      if (stage.init == GrpInit::Pca) {
        try {
          // deflated rows live in the complement, so this stays orthogonal
          // to the columns found so far
          return pca_subspace(deflated, 1);
        } catch (const RankDeficient& err) {
          warnings.push_back(std::string("stage ") + std::to_string(q + 1) +
                             ": pca init failed (" + err.what() +
                             "); falling back to random seeded init");
        }
      }
      return random_in_complement();
    }();

    CgResult stage_result = detail::solve_grp(deflated, stage, u0q);
    Eigen::VectorXd u_q = stage_result.point.matrix().col(0);
    if (q > 0) {
      // round-off hygiene: keep the new column in the orthogonal complement
      const auto u_prev = columns.leftCols(q);
      u_q -= u_prev * (u_prev.transpose() * u_q);
      u_q /= u_q.norm();
    }
    columns.col(q) = u_q;
    total_iterations += stage_result.trace.iterations_run;
    last_termination = stage_result.trace.termination;
  }

  SubspaceDescriptor desc{orthonormalize(columns), params, 0.0, 0.0,
                          0, Termination::MaxIters, {}};
  desc.final_objective = grp_objective(desc.point, xn, params);
  desc.constraints_satisfied_fraction =
      detail::satisfied_fraction(desc.point, xn, params.eta);
  desc.iterations_run = total_iterations;
  desc.termination = last_termination;
  desc.warnings = std::move(warnings);
  return desc;
}

}  // namespace grasspool
