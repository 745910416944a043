#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"
#include "grasspool/sequence.hpp"

namespace grasspool {

enum class Dynamics { MonotoneLine, MonotonePlane, OscillatingPlane };

inline const char* to_string(Dynamics d) {
  switch (d) {
    case Dynamics::MonotoneLine: return "monotone-line";
    case Dynamics::MonotonePlane: return "monotone-plane";
    case Dynamics::OscillatingPlane: return "oscillating-plane";
  }
  return "unknown";
}

inline Dynamics parse_dynamics(const std::string& name) {
  if (name == "monotone-line") return Dynamics::MonotoneLine;
  if (name == "monotone-plane") return Dynamics::MonotonePlane;
  if (name == "oscillating-plane") return Dynamics::OscillatingPlane;
  throw ParseError("unknown dynamics '" + name + "'");
}

struct SyntheticSpec {
  int classes = 3;
  int sequences_per_class = 30;
  Eigen::Index n = 40;  // frames per sequence
  Eigen::Index d = 64;  // feature dimension
  Dynamics dynamics = Dynamics::MonotonePlane;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 1 || sequences_per_class < 1 || n < 1 || d < 1) {
      throw Error("SyntheticSpec: counts must be >= 1");
    }
    if (!(noise_sigma >= 0.0)) {
      throw Error("SyntheticSpec: noise_sigma must be >= 0");
    }
  }
};

struct LabeledDataset {
  std::vector<FeatureSequence> sequences;
  std::vector<int> labels;                   // class index per sequence
  std::vector<Eigen::MatrixXd> class_frames;  // planted d x 2 frame per class
  Eigen::MatrixXd background;                 // d x 2 shared static context
};

// Seeded synthetic sequences with planted temporal dynamics.
//
// Every class gets its own orthonormal d x 2 frame {w1, w2} carrying the
// ordered signal. On top of it, every sequence carries a "context" component
// living in a 2-plane shared by ALL classes: a per-sequence phase plus
// per-frame jitter within that plane (the analogue of dominant background
// content that varies without temporal structure). The context is strong
// enough that a plain low-rank fit latches onto the shared plane, while the
// planted dynamics remain the only directions whose projection energies
// grow with time. Per frame, for t = 1..n and s = t/n:
//   MonotoneLine:     x_t = context_t + s * w1                            + eps
//   MonotonePlane:    x_t = context_t + s * w1 + 0.3 sin(2 pi s) w2       + eps
//   OscillatingPlane: x_t = context_t + cos(2 pi f s) w1 + sin(2 pi f s) w2 + eps
// with eps ~ N(0, sigma^2 I) and a class-distinct frequency f. Rows are
// returned raw (pooling unit-normalizes them); the planted frames and the
// context plane are returned for inspection.
inline LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto draw_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    }
    return m;
  };

  constexpr double kContextScale = 2.0;
  constexpr double kContextJitter = 0.5;  // in-plane phase wobble, radians
  constexpr double kPlaneWobble = 0.3;

  LabeledDataset out;
  const bool has_context = spec.d >= 4;  // needs room next to the class frames
  out.background =
      has_context
          ? Eigen::MatrixXd(orthonormalize(draw_matrix(spec.d, 2)).matrix())
          : Eigen::MatrixXd::Zero(spec.d, 2);

  for (int c = 0; c < spec.classes; ++c) {
    Eigen::MatrixXd frame;
    if (spec.d >= 2) {
      frame = orthonormalize(draw_matrix(spec.d, 2)).matrix();
      if (has_context) {
        // keep the planted dynamics out of the context plane
        frame -= out.background * (out.background.transpose() * frame);
        frame = orthonormalize(frame).matrix();
      }
    } else {
      frame = Eigen::MatrixXd::Zero(spec.d, 2);
      frame(0, 0) = 1.0;
    }
    out.class_frames.push_back(frame);

    const double freq = static_cast<double>(c + 1);
    for (int s = 0; s < spec.sequences_per_class; ++s) {
      const double phase = std::uniform_real_distribution<double>(
          0.0, 2.0 * std::numbers::pi)(rng);
      Eigen::MatrixXd frames(spec.n, spec.d);
      for (Eigen::Index t = 1; t <= spec.n; ++t) {
        const double frac =
            static_cast<double>(t) / static_cast<double>(spec.n);
        Eigen::VectorXd row = Eigen::VectorXd::Zero(spec.d);
        if (has_context) {
          const double angle = phase + kContextJitter * gauss(rng);
          row = kContextScale *
                (std::cos(angle) * out.background.col(0) +
                 std::sin(angle) * out.background.col(1));
        }
        switch (spec.dynamics) {
          case Dynamics::MonotoneLine:
            row += frac * frame.col(0);
            break;
          case Dynamics::MonotonePlane:
            row += frac * frame.col(0) +
                   kPlaneWobble * std::sin(2.0 * std::numbers::pi * frac) *
                       frame.col(1);
            break;
          case Dynamics::OscillatingPlane:
            row += std::cos(2.0 * std::numbers::pi * freq * frac) *
                       frame.col(0) +
                   std::sin(2.0 * std::numbers::pi * freq * frac) *
                       frame.col(1);
            break;
        }
        if (spec.noise_sigma > 0.0) {
          for (Eigen::Index k = 0; k < spec.d; ++k) {
            row(k) += spec.noise_sigma * gauss(rng);
          }
        }
        frames.row(t - 1) = row.transpose();
      }
      out.sequences.emplace_back(std::move(frames));
      out.labels.push_back(c);
    }
  }
  return out;
}

}  // namespace grasspool
