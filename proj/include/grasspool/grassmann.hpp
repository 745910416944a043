#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "grasspool/errors.hpp"

namespace grasspool {

// Tolerances for the manifold invariants. Operations construct points that
// satisfy these; constructors verify them.
inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kHorizontalTol = 1e-8;

// A d x p matrix with orthonormal columns. Used as the canonical
// representative of the p-dimensional subspace it spans.
class StiefelPoint {
 public:
  explicit StiefelPoint(Eigen::MatrixXd basis) : basis_(std::move(basis)) {
    const Eigen::Index d = basis_.rows();
    const Eigen::Index p = basis_.cols();
    if (p < 1 || p > d) {
      throw ShapeMismatch("StiefelPoint: need 1 <= p <= d, got d=" +
                          std::to_string(d) + " p=" + std::to_string(p));
    }
    const double defect =
        (basis_.transpose() * basis_ -
         Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
    if (!(defect <= kOrthonormalTol)) {
      throw RankDeficient(
          "StiefelPoint: columns not orthonormal, |U'U - I|_max = " +
          std::to_string(defect));
    }
  }

  const Eigen::MatrixXd& matrix() const { return basis_; }
  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index subspace_dim() const { return basis_.cols(); }

 private:
  Eigen::MatrixXd basis_;
};

// A horizontal tangent vector at `base`: satisfies base' * matrix = 0.
struct TangentVector {
  Eigen::MatrixXd matrix;
  StiefelPoint base;

  TangentVector(Eigen::MatrixXd m, StiefelPoint at)
      : matrix(std::move(m)), base(std::move(at)) {
    if (matrix.rows() != base.ambient_dim() ||
        matrix.cols() != base.subspace_dim()) {
      throw ShapeMismatch("TangentVector: shape does not match base point");
    }
    const double defect =
        (base.matrix().transpose() * matrix).cwiseAbs().maxCoeff();
    if (!(defect <= kHorizontalTol)) {
      throw ShapeMismatch("TangentVector: not horizontal, |U'D|_max = " +
                          std::to_string(defect));
    }
  }

  double norm() const { return matrix.norm(); }
};

// Canonical orthonormal representative of span(M) via thin Householder QR.
// Columns are sign-fixed so that the diagonal of R is positive, which makes
// the representative unique and keeps retract(U, 0) == U exactly.
inline StiefelPoint orthonormalize(const Eigen::MatrixXd& m) {
  const Eigen::Index d = m.rows();
  const Eigen::Index p = m.cols();
  if (p < 1 || p > d) {
    throw ShapeMismatch("orthonormalize: need 1 <= p <= d, got d=" +
                        std::to_string(d) + " p=" + std::to_string(p));
  }
  if (!m.allFinite()) {
    throw NonFinite("orthonormalize: input has NaN/Inf entries");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, p);
  const Eigen::VectorXd r_diag =
      qr.matrixQR().topLeftCorner(p, p).diagonal();
  const double r_max = r_diag.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(r_diag(j)) < 1e-12 * r_max) {
      throw RankDeficient("orthonormalize: numerical rank < p (|R_" +
                          std::to_string(j) + std::to_string(j) + "| = " +
                          std::to_string(std::abs(r_diag(j))) + ")");
    }
    if (r_diag(j) < 0.0) q.col(j) = -q.col(j);
  }
  return StiefelPoint(std::move(q));
}

// Riemannian gradient / horizontal projection: (I - UU')G, computed as
// G - U(U'G) so no d x d matrix is formed.
inline TangentVector project_tangent(const StiefelPoint& u,
                                     const Eigen::MatrixXd& g) {
  if (g.rows() != u.ambient_dim() || g.cols() != u.subspace_dim()) {
    throw ShapeMismatch("project_tangent: gradient shape mismatch");
  }
  Eigen::MatrixXd h = g - u.matrix() * (u.matrix().transpose() * g);
  // one more sweep kills the O(eps) residual of the first projection
  h -= u.matrix() * (u.matrix().transpose() * h);
  return TangentVector(std::move(h), u);
}

// QR retraction: pull U + step * D back onto the manifold. A zero step (or
// zero direction) returns U itself, bit for bit.
inline StiefelPoint retract(const StiefelPoint& u, const TangentVector& d,
                            double step) {
  if (d.base.ambient_dim() != u.ambient_dim() ||
      d.base.subspace_dim() != u.subspace_dim()) {
    throw ShapeMismatch("retract: tangent vector has wrong shape");
  }
  if (step == 0.0 || d.matrix.isZero(0.0)) return u;
  return orthonormalize(u.matrix() + step * d.matrix);
}

// Projection transport: re-project the horizontal part at the new point.
inline TangentVector transport(const StiefelPoint& /*u_from*/,
                               const StiefelPoint& u_to,
                               const TangentVector& d) {
  return project_tangent(u_to, d.matrix);
}

// Subspace (projection-metric) distance: |UU' - VV'|_F / sqrt(2)
//                                      = sqrt(p - |U'V|_F^2).
inline double projection_distance(const StiefelPoint& u,
                                  const StiefelPoint& v) {
  if (u.ambient_dim() != v.ambient_dim() ||
      u.subspace_dim() != v.subspace_dim()) {
    throw ShapeMismatch("projection_distance: shape mismatch");
  }
  const double overlap = (u.matrix().transpose() * v.matrix()).squaredNorm();
  const double gap = static_cast<double>(u.subspace_dim()) - overlap;
  return std::sqrt(std::max(0.0, gap));
}

}  // namespace grasspool
