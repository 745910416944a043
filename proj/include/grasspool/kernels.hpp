#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"

namespace grasspool {

// Grassmann kernel menu. All forms depend only on the spanned subspaces:
// |U1'U2|_F^2 is the sum of squared principal-angle cosines and det(U1'U2)
// enters squared (or at even degree), so right-multiplying either argument
// by an orthogonal matrix changes nothing.
enum class KernelKind { Linear, ProjPoly, ProjRbf, BinetCauchyPoly, BinetCauchyRbf };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::ProjPoly: return "poly-proj";
    case KernelKind::ProjRbf: return "rbf-proj";
    case KernelKind::BinetCauchyPoly: return "bc-poly";
    case KernelKind::BinetCauchyRbf: return "bc-rbf";
  }
  return "unknown";
}

inline KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "poly-proj") return KernelKind::ProjPoly;
  if (name == "rbf-proj") return KernelKind::ProjRbf;
  if (name == "bc-poly") return KernelKind::BinetCauchyPoly;
  if (name == "bc-rbf") return KernelKind::BinetCauchyRbf;
  throw Error("unknown kernel '" + name +
              "' (expected rbf-proj, poly-proj, linear, bc-poly or bc-rbf)");
}

struct KernelSpec {
  KernelKind kind = KernelKind::ProjRbf;
  double beta = 1.0;
  int degree = 2;  // poly kinds; even keeps Binet-Cauchy sign-free

  void validate() const {
    if (!(beta > 0.0)) throw Error("KernelSpec: beta must be > 0");
    if (degree < 1) throw Error("KernelSpec: degree must be >= 1");
  }
};

struct GramMatrix {
  Eigen::MatrixXd values;
  std::vector<int> labels;  // optional, empty when unlabeled
  KernelSpec spec;

  Eigen::Index size() const { return values.rows(); }
};

inline double kernel_eval(const KernelSpec& spec, const StiefelPoint& u1,
                          const StiefelPoint& u2) {
  spec.validate();
  if (u1.ambient_dim() != u2.ambient_dim() ||
      u1.subspace_dim() != u2.subspace_dim()) {
    throw ShapeMismatch("kernel_eval: subspaces must share (d, p)");
  }
  const Eigen::MatrixXd overlap = u1.matrix().transpose() * u2.matrix();
  switch (spec.kind) {
    case KernelKind::Linear:
      // <U1 U1', U2 U2'> without forming the projectors
      return overlap.squaredNorm();
    case KernelKind::ProjPoly:
      return std::pow(spec.beta * overlap.squaredNorm(), spec.degree);
    case KernelKind::ProjRbf:
      return std::exp(spec.beta * overlap.squaredNorm());
    case KernelKind::BinetCauchyPoly:
      return std::pow(spec.beta * overlap.determinant(), spec.degree);
    case KernelKind::BinetCauchyRbf: {
      const double det = overlap.determinant();
      return std::exp(spec.beta * det * det);
    }
  }
  throw Error("kernel_eval: unknown kernel kind");
}

inline GramMatrix gram(const std::vector<StiefelPoint>& descriptors,
                       const KernelSpec& spec) {
  spec.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(descriptors.size());
  if (m == 0) throw EmptySequence("gram: no descriptors");
  for (const auto& u : descriptors) {
    if (u.ambient_dim() != descriptors.front().ambient_dim() ||
        u.subspace_dim() != descriptors.front().subspace_dim()) {
      throw ShapeMismatch("gram: descriptors must share (d, p)");
    }
  }
  GramMatrix g;
  g.spec = spec;
  g.values.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double v = kernel_eval(spec, descriptors[i], descriptors[j]);
      g.values(i, j) = v;
      g.values(j, i) = v;
    }
  }
  return g;
}

// Kernel row of one query subspace against a training set.
inline Eigen::VectorXd kernel_row(const KernelSpec& spec,
                                  const StiefelPoint& query,
                                  const std::vector<StiefelPoint>& training) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(training.size()));
  for (std::size_t j = 0; j < training.size(); ++j) {
    row(static_cast<Eigen::Index>(j)) = kernel_eval(spec, query, training[j]);
  }
  return row;
}

// Entrywise sum, e.g. combining per-modality Grams. Keeps g1's spec/labels.
inline GramMatrix gram_sum(const GramMatrix& g1, const GramMatrix& g2) {
  if (g1.values.rows() != g2.values.rows() ||
      g1.values.cols() != g2.values.cols()) {
    throw ShapeMismatch("gram_sum: size mismatch");
  }
  GramMatrix out = g1;
  out.values += g2.values;
  return out;
}

}  // namespace grasspool
