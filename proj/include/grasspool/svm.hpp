#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/kernels.hpp"

namespace grasspool {

// One-vs-rest kernel SVM trained on a precomputed Gram matrix.
struct SvmModel {
  std::vector<int> classes;                 // ascending
  std::vector<Eigen::VectorXd> dual_coefs;  // per class, alpha_i * y_i
  std::vector<double> biases;
  std::vector<std::vector<Eigen::Index>> support_indices;
  double regularization_c = 1.0;
  KernelSpec spec;
  std::vector<std::string> warnings;
  std::vector<double> kkt_residuals;  // per class, at the last sweep
  Eigen::Index training_size = 0;
};

namespace detail {

struct SmoResult {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  double kkt_residual = 0.0;
};

// SMO-style pair updates for the binary dual, deterministic sweep order:
// scan i in 0..m-1, partner j maximizing |E_i - E_j| (lowest index wins
// ties). Stops when the worst KKT violation drops to kkt_tol.
inline SmoResult smo_binary(
    const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double c,
    double kkt_tol = 1e-3, int max_sweeps = 10000) {
  const Eigen::Index m = k.rows();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  double bias = 0.0;
  // error cache: E_i = f(x_i) - y_i
  Eigen::VectorXd err = -y;

  const auto kkt_residual = [&]() {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double margin = y(i) * (err(i) + y(i));  // y_i * f_i
      if (alpha(i) < c) worst = std::max(worst, 1.0 - margin);
      if (alpha(i) > 0.0) worst = std::max(worst, margin - 1.0);
    }
    return worst;
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    int changed = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double r = y(i) * err(i);
      const bool violates = (r < -kkt_tol && alpha(i) < c) ||
                            (r > kkt_tol && alpha(i) > 0.0);
      if (!violates) continue;

      Eigen::Index j = -1;
      double best_gap = -1.0;
      for (Eigen::Index cand = 0; cand < m; ++cand) {
        if (cand == i) continue;
        const double gap = std::abs(err(i) - err(cand));
        if (gap > best_gap) {
          best_gap = gap;
          j = cand;
        }
      }
      if (j < 0) continue;

      const double kappa = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (kappa <= 1e-12) continue;

      double lo, hi;
      if (y(i) != y(j)) {
        lo = std::max(0.0, alpha(j) - alpha(i));
        hi = std::min(c, c + alpha(j) - alpha(i));
      } else {
        lo = std::max(0.0, alpha(i) + alpha(j) - c);
        hi = std::min(c, alpha(i) + alpha(j));
      }
      if (hi - lo < 1e-12) continue;

      double aj = alpha(j) + y(j) * (err(i) - err(j)) / kappa;
      aj = std::clamp(aj, lo, hi);
      const double dj = aj - alpha(j);
      if (std::abs(dj) < 1e-12) continue;
      const double ai = alpha(i) - y(i) * y(j) * dj;
      const double di = ai - alpha(i);

      const double b1 = bias - err(i) - y(i) * di * k(i, i) - y(j) * dj * k(i, j);
      const double b2 = bias - err(j) - y(i) * di * k(i, j) - y(j) * dj * k(j, j);
      double b_new;
      if (ai > 0.0 && ai < c) {
        b_new = b1;
      } else if (aj > 0.0 && aj < c) {
        b_new = b2;
      } else {
        b_new = 0.5 * (b1 + b2);
      }
      const double db = b_new - bias;

      err += (y(i) * di) * k.col(i) + (y(j) * dj) * k.col(j) +
             Eigen::VectorXd::Constant(m, db);
      alpha(i) = ai;
      alpha(j) = aj;
      bias = b_new;
      ++changed;
    }
    if (changed == 0) break;  // no admissible pair update left
    if (kkt_residual() <= kkt_tol) break;
  }
  return {alpha, bias, kkt_residual()};
}

}  // namespace detail

// Train one-vs-rest binary SVMs in the dual on a precomputed Gram matrix.
// An indefinite Gram (min eigenvalue < -1e-6) is clipped to its PSD part
// with a recorded warning before training.
inline SvmModel svm_train(const GramMatrix& gram_matrix,
                          const std::vector<int>& labels, double c) {
  const Eigen::Index m = gram_matrix.values.rows();
  if (m == 0 || static_cast<Eigen::Index>(labels.size()) != m) {
    throw ShapeMismatch("svm_train: labels must match gram size");
  }
  if (gram_matrix.values.cols() != m) {
    throw ShapeMismatch("svm_train: gram matrix must be square");
  }
  if (!(c > 0.0)) throw Error("svm_train: C must be > 0");

  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw SingleClass("svm_train: need at least 2 classes, got " +
                      std::to_string(distinct.size()));
  }

  SvmModel model;
  model.classes.assign(distinct.begin(), distinct.end());
  model.regularization_c = c;
  model.spec = gram_matrix.spec;
  model.training_size = m;

  Eigen::MatrixXd k = gram_matrix.values;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-6) {
    model.warnings.push_back("gram matrix not PSD (min eigenvalue " +
                             std::to_string(min_eig) +
                             "); clipping spectrum at 0");
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    k = eig.eigenvectors() * clipped.asDiagonal() *
        eig.eigenvectors().transpose();
  }

  for (const int cls : model.classes) {
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      y(i) = labels[static_cast<std::size_t>(i)] == cls ? 1.0 : -1.0;
    }
    const detail::SmoResult fit = detail::smo_binary(k, y, c);
    model.dual_coefs.push_back(fit.alpha.cwiseProduct(y));
    model.biases.push_back(fit.bias);
    model.kkt_residuals.push_back(fit.kkt_residual);
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (fit.alpha(i) > 1e-12) sv.push_back(i);
    }
    model.support_indices.push_back(std::move(sv));
  }
  return model;
}

// Decision values of every one-vs-rest classifier for a kernel row against
// the training set; the predicted class maximizes them, ties broken by the
// lowest class index.
inline std::pair<int, Eigen::VectorXd> svm_predict(
    const SvmModel& model, const Eigen::VectorXd& kernel_row) {
  if (kernel_row.size() != model.training_size) {
    throw ShapeMismatch("svm_predict: kernel row has length " +
                        std::to_string(kernel_row.size()) + ", expected " +
                        std::to_string(model.training_size));
  }
  const auto n_classes = static_cast<Eigen::Index>(model.classes.size());
  Eigen::VectorXd scores(n_classes);
  for (Eigen::Index ci = 0; ci < n_classes; ++ci) {
    scores(ci) = model.dual_coefs[static_cast<std::size_t>(ci)].dot(kernel_row) +
                 model.biases[static_cast<std::size_t>(ci)];
  }
  Eigen::Index best = 0;
  for (Eigen::Index ci = 1; ci < n_classes; ++ci) {
    if (scores(ci) > scores(best)) best = ci;
  }
  return {model.classes[static_cast<std::size_t>(best)], scores};
}

}  // namespace grasspool
