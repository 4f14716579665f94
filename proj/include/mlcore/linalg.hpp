#pragma once

#include <algorithm>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "mlcore/core.hpp"

namespace mlcore::linalg {

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns, matching values
};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Each eigenvector is signed so that its largest-magnitude entry is positive
/// (first such entry on ties).
inline SymmetricEigen symmetric_eigen(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) throw NotConverged("symmetric eigensolver failed");
  const Eigen::Index n = A.rows();
  std::vector<Eigen::Index> order(static_cast<Index>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Vector& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ev[a] > ev[b]; });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = ev[order[Index(k)]];
    Vector v = solver.eigenvectors().col(order[Index(k)]);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(v[i]) > best * (1.0 + 1e-12)) {
        best = std::abs(v[i]);
        arg = i;
      }
    if (v[arg] < 0) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

/// Solve A x = b for symmetric positive definite A. Throws SingularCovariance
/// when A is numerically singular (relative pivot below `rel_tol`).
inline Matrix spd_solve(const Matrix& A, const Matrix& b, const char* what = "matrix",
                        double rel_tol = 1e-12) {
  Eigen::LDLT<Matrix> ldlt(A);
  const Vector d = ldlt.vectorD();
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= rel_tol * scale)
    throw SingularCovariance(std::string(what) + " is singular; add regularization");
  return ldlt.solve(b);
}

/// Minimum-norm least-squares solution of A x = b.
inline Matrix lstsq(const Matrix& A, const Matrix& b) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  cod.setThreshold(1e-12);
  return cod.solve(b);
}

inline Matrix to_col_major(const SampleMatrix& X) { return Matrix(X.values()); }

/// Column means and the centered copy of X.
inline std::pair<Vector, Matrix> center_columns(const Matrix& X) {
  Vector mean = X.colwise().mean().transpose();
  Matrix C = X.rowwise() - mean.transpose();
  return {std::move(mean), std::move(C)};
}

}  // namespace mlcore::linalg
