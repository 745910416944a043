#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"
#include "grasspool/sequence.hpp"

namespace grasspool {

enum class PoolMethod { Average, Max, RankPoolLine };

struct VectorDescriptor {
  Eigen::VectorXd vector;
  PoolMethod method;
};

inline VectorDescriptor pool_average(const FeatureSequence& x) {
  if (x.length() < 1) throw EmptySequence("pool_average: empty sequence");
  return {x.frames.colwise().mean().transpose(), PoolMethod::Average};
}

inline VectorDescriptor pool_max(const FeatureSequence& x) {
  if (x.length() < 1) throw EmptySequence("pool_max: empty sequence");
  return {x.frames.colwise().maxCoeff().transpose(), PoolMethod::Max};
}

// Pairwise-hinge rank pooling: minimize
//   1/2 |z|^2 + lambda * sum_{i<j} max(0, 1 + z'x_i - z'x_j)
// by subgradient descent with step 1/(k+1) and best-iterate tracking. The
// unit margin keeps later frames scoring higher. At the hinge kink the
// subgradient 0 is used. Optional history records the best objective seen
// after each iteration (non-increasing by construction).
inline VectorDescriptor rank_pool_line(
    const FeatureSequence& x, double lambda, int iters = 1000,
    std::vector<double>* best_objective_history = nullptr) {
  const Eigen::Index n = x.length();
  const Eigen::Index d = x.dim();
  if (n < 2) throw DegenerateSequence("rank_pool_line: need n >= 2");
  if (iters < 1) throw Error("rank_pool_line: iters must be >= 1");

  const auto objective = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd s = x.frames * z;
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        hinge += std::max(0.0, 1.0 + s(i) - s(j));
      }
    }
    return 0.5 * z.squaredNorm() + lambda * hinge;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z_best = z;
  double f_best = objective(z);
  if (best_objective_history) best_objective_history->push_back(f_best);

  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd s = x.frames * z;
    Eigen::VectorXd sub = z;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (1.0 + s(i) - s(j) > 0.0) {
          sub += lambda * (x.frames.row(i) - x.frames.row(j)).transpose();
        }
      }
    }
    z -= sub / static_cast<double>(k + 1);
    const double f = objective(z);
    if (f < f_best) {
      f_best = f;
      z_best = z;
    }
    if (best_objective_history) best_objective_history->push_back(f_best);
  }
  return {z_best, PoolMethod::RankPoolLine};
}

// Top-p eigenvectors of the scatter matrix sum_i x_i x_i', in descending
// eigenvalue order. For d > n the n x n Gram trick is used instead of the
// d x d scatter. Sign convention: the largest-magnitude entry of each
// column is made positive.
inline StiefelPoint pca_subspace(const FeatureSequence& x, Eigen::Index p) {
  const Eigen::Index n = x.length();
  const Eigen::Index d = x.dim();
  if (p < 1 || p > d) {
    throw ShapeMismatch("pca_subspace: need 1 <= p <= d");
  }

  Eigen::MatrixXd basis(d, p);
  if (d <= n) {
    const Eigen::MatrixXd scatter = x.frames.transpose() * x.frames;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
    const double lead = eig.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < p; ++k) {
      const Eigen::Index src = d - 1 - k;  // eigenvalues come back ascending
      if (eig.eigenvalues()(src) <= 1e-12 * std::max(lead, 1e-300)) {
        throw RankDeficient("pca_subspace: scatter rank < p");
      }
      basis.col(k) = eig.eigenvectors().col(src);
    }
  } else {
    const Eigen::MatrixXd gram = x.frames * x.frames.transpose();  // n x n
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double lead = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (p > n) throw RankDeficient("pca_subspace: scatter rank < p");
    for (Eigen::Index k = 0; k < p; ++k) {
      const Eigen::Index src = n - 1 - k;
      const double ev = eig.eigenvalues()(src);
      if (ev <= 1e-12 * std::max(lead, 1e-300)) {
        throw RankDeficient("pca_subspace: scatter rank < p");
      }
      basis.col(k) =
          (x.frames.transpose() * eig.eigenvectors().col(src)) /
          std::sqrt(ev);
    }
  }

  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::Index imax = 0;
    basis.col(k).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, k) < 0.0) basis.col(k) = -basis.col(k);
  }
  // eigenvectors are orthonormal in theory; re-orthonormalize to meet the
  // StiefelPoint tolerance after the Gram-trick route
  Eigen::MatrixXd q = orthonormalize(basis).matrix();
  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::Index imax = 0;
    q.col(k).cwiseAbs().maxCoeff(&imax);
    if (q(imax, k) < 0.0) q.col(k) = -q.col(k);
  }
  return StiefelPoint(std::move(q));
}

}  // namespace grasspool
