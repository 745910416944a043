#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "grasspool/grassmann.hpp"
#include "grasspool/grp.hpp"
#include "grasspool/sequence.hpp"

namespace testutil {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  }
  return m;
}

inline grasspool::StiefelPoint random_stiefel(Eigen::Index d, Eigen::Index p,
                                              std::uint64_t seed) {
  return grasspool::orthonormalize(random_matrix(d, p, seed));
}

// random p x p orthogonal matrix (QR of a Gaussian draw)
inline Eigen::MatrixXd random_orthogonal(Eigen::Index p, std::uint64_t seed) {
  return grasspool::orthonormalize(random_matrix(p, p, seed)).matrix();
}

// independent span oracle: the projector of M through the normal equations
inline Eigen::MatrixXd projector_normal_equations(const Eigen::MatrixXd& m) {
  return m * (m.transpose() * m).inverse() * m.transpose();
}

// independent subspace-distance oracle through the full d x d projectors
inline double projector_distance(const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd gap = u * u.transpose() - v * v.transpose();
  return gap.norm() / std::sqrt(2.0);
}

inline grasspool::FeatureSequence random_sequence(Eigen::Index n,
                                                  Eigen::Index d,
                                                  std::uint64_t seed,
                                                  bool normalize = true) {
  grasspool::FeatureSequence x(random_matrix(n, d, seed));
  return normalize ? grasspool::normalize_rows(x) : x;
}

// keep every pair's hinge argument clear of the kink so finite differences
// see a locally smooth objective
inline bool kink_free(const grasspool::StiefelPoint& u,
                      const grasspool::FeatureSequence& x, double eta,
                      double slack = 1e-3) {
  const Eigen::VectorXd e = (x.frames * u.matrix()).rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    for (Eigen::Index j = i + 1; j < e.size(); ++j) {
      if (std::abs(e(i) - e(j) + eta) < slack) return false;
    }
  }
  return true;
}

struct KinkFreeInstance {
  grasspool::FeatureSequence x;
  grasspool::StiefelPoint u;
};

inline KinkFreeInstance kink_free_instance(Eigen::Index n, Eigen::Index d,
                                           Eigen::Index p, double eta,
                                           std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    grasspool::FeatureSequence x =
        random_sequence(n, d, seed * 1000003 + attempt * 2);
    grasspool::StiefelPoint u =
        random_stiefel(d, p, seed * 1000003 + attempt * 2 + 1);
    if (kink_free(u, x, eta)) return {std::move(x), std::move(u)};
  }
}

}  // namespace testutil
