#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "grasspool/errors.hpp"

namespace grasspool {

// A temporally ordered sequence of feature vectors, one per row.
struct FeatureSequence {
  Eigen::MatrixXd frames;  // n x d, row t is the frame-t feature
  bool normalized = false;
  std::vector<Eigen::Index> zero_rows;  // rows that were zero when normalizing

  FeatureSequence() = default;
  explicit FeatureSequence(Eigen::MatrixXd data, bool is_normalized = false)
      : frames(std::move(data)), normalized(is_normalized) {
    if (frames.rows() < 1 || frames.cols() < 1) {
      throw EmptySequence("FeatureSequence: need n >= 1 and d >= 1");
    }
    if (!frames.allFinite()) {
      throw NonFinite("FeatureSequence: frames contain NaN/Inf");
    }
  }

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

// Scale every row to unit l2 norm. Rows that are exactly zero are left as
// zero and their indices recorded on the result.
inline FeatureSequence normalize_rows(const FeatureSequence& x) {
  FeatureSequence out = x;
  out.zero_rows.clear();
  for (Eigen::Index i = 0; i < out.frames.rows(); ++i) {
    const double norm = out.frames.row(i).norm();
    if (norm == 0.0) {
      out.zero_rows.push_back(i);
    } else {
      out.frames.row(i) /= norm;
    }
  }
  out.normalized = true;
  return out;
}

}  // namespace grasspool
