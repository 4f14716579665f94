#pragma once

#include <string>

#include "mlcore/core.hpp"
#include "mlcore/kernels.hpp"
#include "mlcore/linalg.hpp"

namespace mlcore {

struct PcaModel {
  Vector mean;
  Matrix components;  // rows = principal axes, descending eigenvalue
  Vector eigenvalues;

  Index num_components() const noexcept { return Index(components.rows()); }
};

/// Eigendecomposition of the (n-1)-normalized sample covariance. Each axis is
/// signed so that its largest-magnitude entry is positive.
inline PcaModel pca_learn(const SampleMatrix& X) {
  if (X.rows() < 2) throw InvalidData("pca needs at least 2 samples");
  PcaModel m;
  auto [mean, Xc] = linalg::center_columns(linalg::to_col_major(X));
  m.mean = mean;
  const Matrix cov = (Xc.transpose() * Xc) / double(X.rows() - 1);
  auto eig = linalg::symmetric_eigen(cov);
  m.eigenvalues = eig.values.unaryExpr([](double v) { return v < 0.0 ? 0.0 : v; });
  m.components = eig.vectors.transpose();
  return m;
}

inline SampleMatrix pca_transform(const PcaModel& m, const SampleMatrix& X, Index k) {
  if (Eigen::Index(X.cols()) != m.mean.size())
    throw ShapeMismatch("pca model expects " + std::to_string(m.mean.size()) + " features, got " +
                        std::to_string(X.cols()));
  if (k < 1 || k > m.num_components())
    throw InvalidParameter("pca k must be in [1, " + std::to_string(m.num_components()) + "], got " +
                           std::to_string(k));
  const Matrix Xc = X.values().rowwise() - m.mean.transpose();
  return SampleMatrix(RowMatrix(Xc * m.components.topRows(Eigen::Index(k)).transpose()));
}

/// Maps k-dimensional scores back to input space: mean + Z * components_k.
inline SampleMatrix pca_inverse(const PcaModel& m, const SampleMatrix& Z) {
  const auto k = Eigen::Index(Z.cols());
  if (k > Eigen::Index(m.num_components())) throw ShapeMismatch("more score columns than components");
  RowMatrix X = Z.values() * m.components.topRows(k);
  X.rowwise() += m.mean.transpose();
  return SampleMatrix(X);
}

struct KpcaModel {
  GramCentering centering;
  Matrix dual_vectors;  // n x r, eigenvectors of the centered Gram scaled by 1/sqrt(lambda)
  Vector eigenvalues;   // r retained, descending
  KernelSpec kernel = KernelSpec::precomputed();
  RowMatrix training_inputs;

  Index num_components() const noexcept { return Index(eigenvalues.size()); }
};

inline constexpr double kpca_eigenvalue_tolerance = 1e-10;

inline KpcaModel kpca_learn(const GramMatrix& K) {
  if (!K.square()) throw ShapeMismatch("kpca needs a square Gram matrix");
  KpcaModel m;
  m.centering = centering_of(K);
  const auto eig = linalg::symmetric_eigen(center_gram(K).values);
  Eigen::Index r = 0;
  while (r < eig.values.size() && eig.values[r] > kpca_eigenvalue_tolerance) ++r;
  m.eigenvalues = eig.values.head(r);
  m.dual_vectors = eig.vectors.leftCols(r);
  for (Eigen::Index j = 0; j < r; ++j) m.dual_vectors.col(j) /= std::sqrt(m.eigenvalues[j]);
  return m;
}

inline KpcaModel kpca_learn(const SampleMatrix& X, const KernelSpec& kernel) {
  KpcaModel m = kpca_learn(gram(kernel, X));
  m.kernel = kernel;
  m.training_inputs = X.values();
  return m;
}

/// Scores from cross-Gram rows k(z_r, x_i) against the training set.
inline Matrix kpca_transform(const KpcaModel& m, const Matrix& cross_gram, Index k) {
  if (k < 1 || k > m.num_components())
    throw InvalidParameter("kpca k must be in [1, " + std::to_string(m.num_components()) + "], got " +
                           std::to_string(k));
  return center_cross_gram(cross_gram, m.centering) * m.dual_vectors.leftCols(Eigen::Index(k));
}

inline Matrix kpca_transform(const KpcaModel& m, const SampleMatrix& X, Index k) {
  if (!m.kernel.needs_data()) throw UnsupportedKernel("precomputed-kernel model needs cross-Gram rows");
  if (Eigen::Index(X.cols()) != m.training_inputs.cols()) throw ShapeMismatch("feature count mismatch");
  return kpca_transform(m, detail::gram_raw(m.kernel, X.values(), m.training_inputs, false), k);
}

}  // namespace mlcore
