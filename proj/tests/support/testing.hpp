#pragma once

// Test-only helpers: seeded generators and brute-force oracles that share no
// code path with the library routines they check.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <random>
#include <stdexcept>
#include <vector>

#include "mlcore/core.hpp"

namespace mlcore::testing {

using Grid = std::vector<std::vector<double>>;

inline RowMatrix random_matrix(std::mt19937_64& gen, Index n, Index p, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(gen);
  return m;
}

inline Vector random_vector(std::mt19937_64& gen, Index n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(gen);
  return v;
}

inline Grid to_grid(const Matrix& m) {
  Grid g(Index(m.rows()), std::vector<double>(Index(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) g[Index(i)][Index(j)] = m(i, j);
  return g;
}

/// Gaussian elimination with partial pivoting on plain nested vectors.
inline std::vector<double> gauss_solve(Grid A, std::vector<double> b) {
  const Index n = A.size();
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    if (std::abs(A[piv][c]) < 1e-300) throw std::runtime_error("oracle: singular system");
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (Index r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (Index k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (Index i = n; i-- > 0;) {
    double s = b[i];
    for (Index k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

/// Least squares with intercept via explicit normal equations on [1 X].
inline std::vector<double> normal_equations(const RowMatrix& X, const Vector& y) {
  const Index n = Index(X.rows()), p = Index(X.cols());
  Grid A(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> rhs(p + 1, 0.0);
  for (Index i = 0; i < n; ++i) {
    std::vector<double> row(p + 1, 1.0);
    for (Index j = 0; j < p; ++j) row[j + 1] = X(Eigen::Index(i), Eigen::Index(j));
    for (Index a = 0; a <= p; ++a) {
      rhs[a] += row[a] * y[Eigen::Index(i)];
      for (Index b = 0; b <= p; ++b) A[a][b] += row[a] * row[b];
    }
  }
  return gauss_solve(A, rhs);  // [intercept, w...]
}

inline double correlation(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_min_eigenvalue(Matrix A) {
  const Eigen::Index n = A.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-22 * std::max(1.0, A.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
  }
  return A.diagonal().minCoeff();
}

/// Dense QP oracle: min 1/2 a'Qa + p'a subject to y'a = 0 and 0 <= a <= C,
/// by accelerated projected gradient. The projection onto the feasible set is
/// a bisection on the multiplier of the equality constraint.
struct QpSolution {
  std::vector<double> alpha;
  double objective;
};

inline std::vector<double> project_box_hyperplane(const std::vector<double>& v, const std::vector<double>& y,
                                                  double C) {
  const Index n = v.size();
  auto at = [&](double nu, Index i) { return std::min(C, std::max(0.0, v[i] - nu * y[i])); };
  auto g = [&](double nu) {
    double s = 0;
    for (Index i = 0; i < n; ++i) s += y[i] * at(nu, i);
    return s;
  };
  double bound = C;
  for (double x : v) bound = std::max(bound, std::abs(x) + C);
  double lo = -bound, hi = bound;  // g(lo) >= 0 >= g(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  std::vector<double> out(n);
  for (Index i = 0; i < n; ++i) out[i] = at(0.5 * (lo + hi), i);
  return out;
}

inline double qp_objective(const Grid& Q, const std::vector<double>& p, const std::vector<double>& a) {
  double f = 0;
  for (Index i = 0; i < a.size(); ++i) {
    double qa = 0;
    for (Index j = 0; j < a.size(); ++j) qa += Q[i][j] * a[j];
    f += 0.5 * a[i] * qa + p[i] * a[i];
  }
  return f;
}

inline QpSolution box_qp_oracle(const Grid& Q, const std::vector<double>& p, const std::vector<double>& y, double C,
                                int iterations = 20000) {
  const Index n = p.size();
  // Lipschitz constant by power iteration
  std::vector<double> v(n, 1.0), w(n);
  double L = 0;
  for (int it = 0; it < 500; ++it) {
    double norm = 0;
    for (Index i = 0; i < n; ++i) {
      w[i] = 0;
      for (Index j = 0; j < n; ++j) w[i] += Q[i][j] * v[j];
      norm += w[i] * w[i];
    }
    norm = std::sqrt(norm);
    if (norm == 0) break;
    L = norm;
    for (Index i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  const double step = 1.0 / (L * 1.01 + 1e-12);
  std::vector<double> a(n, 0.0), z = a, prev = a;
  double t = 1;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(n);
    for (Index i = 0; i < n; ++i) {
      grad[i] = p[i];
      for (Index j = 0; j < n; ++j) grad[i] += Q[i][j] * z[j];
    }
    std::vector<double> u(n);
    for (Index i = 0; i < n; ++i) u[i] = z[i] - step * grad[i];
    a = project_box_hyperplane(u, y, C);
    const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    for (Index i = 0; i < n; ++i) z[i] = a[i] + (t - 1) / tn * (a[i] - prev[i]);
    if (qp_objective(Q, p, a) > qp_objective(Q, p, prev) && it > 0) {
      z = a;  // adaptive restart
      t = 1;
    } else {
      t = tn;
    }
    prev = a;
  }
  return {a, qp_objective(Q, p, a)};
}

#ifdef MLCORE_DATA_DIR
/// Iris from the bundled CSV, read with plain stream parsing.
inline LabeledDataset load_iris() {
  std::ifstream in(std::string(MLCORE_DATA_DIR) + "/iris.csv");
  if (!in) throw std::runtime_error("cannot open iris.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  std::vector<Label> y;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    y.push_back(Label(vals.back()));
    vals.pop_back();
    rows.push_back(vals);
  }
  RowMatrix X(static_cast<Eigen::Index>(rows.size()), 4);
  for (Index i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < 4; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return {SampleMatrix(X), y};
}
#endif

inline std::vector<Label> labels_from(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

}  // namespace mlcore::testing
