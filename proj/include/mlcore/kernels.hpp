#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "mlcore/core.hpp"

namespace mlcore {

enum class KernelKind { Linear, Polynomial, Gaussian, Exponential, Sigmoid, Precomputed, Custom };

inline constexpr std::string_view to_string(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Exponential: return "exponential";
    case KernelKind::Sigmoid: return "sigmoid";
    case KernelKind::Precomputed: return "precomputed";
    case KernelKind::Custom: return "custom";
  }
  return "?";
}

inline KernelKind kernel_kind_from_string(std::string_view s) {
  for (auto k : {KernelKind::Linear, KernelKind::Polynomial, KernelKind::Gaussian,
                 KernelKind::Exponential, KernelKind::Sigmoid, KernelKind::Precomputed,
                 KernelKind::Custom})
    if (to_string(k) == s) return k;
  if (s == "rbf") return KernelKind::Gaussian;
  if (s == "poly") return KernelKind::Polynomial;
  throw InvalidParameter("unknown kernel '" + std::string(s) + "'");
}

/// Kernel choice plus its parameters. Parameters a kind does not use are kept
/// but ignored. An unset gamma resolves to 1/p at evaluation time.
///
/// The sigmoid kernel is not positive semidefinite in general; nothing
/// downstream may rely on PSD-ness for it.
struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  std::optional<double> gamma;
  int degree = 3;
  double coef0 = 0.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec polynomial(int degree, std::optional<double> gamma = {}, double coef0 = 0.0) {
    return {KernelKind::Polynomial, gamma, degree, coef0};
  }
  static KernelSpec gaussian(std::optional<double> gamma = {}) {
    return {KernelKind::Gaussian, gamma, 3, 0.0};
  }
  static KernelSpec exponential(std::optional<double> gamma = {}) {
    return {KernelKind::Exponential, gamma, 3, 0.0};
  }
  static KernelSpec sigmoid(std::optional<double> gamma = {}, double coef0 = 0.0) {
    return {KernelKind::Sigmoid, gamma, 3, coef0};
  }
  static KernelSpec precomputed() { return {KernelKind::Precomputed, {}, 3, 0.0}; }

  bool needs_data() const noexcept {
    return kind != KernelKind::Precomputed && kind != KernelKind::Custom;
  }

  double resolved_gamma(Index features) const {
    if (gamma) return *gamma;
    return features == 0 ? 1.0 : 1.0 / double(features);
  }

  void validate() const {
    if (gamma && !(*gamma > 0.0)) throw InvalidParameter("kernel gamma must be > 0");
    if (kind == KernelKind::Polynomial && degree < 1)
      throw InvalidParameter("polynomial degree must be >= 1");
  }

  bool operator==(const KernelSpec&) const = default;
};

template <typename A, typename B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size())
    throw ShapeMismatch("kernel arguments differ in dimension: " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  spec.validate();
  const double g = spec.resolved_gamma(Index(x.size()));
  switch (spec.kind) {
    case KernelKind::Linear: return x.dot(y);
    case KernelKind::Polynomial: return std::pow(g * x.dot(y) + spec.coef0, spec.degree);
    case KernelKind::Gaussian: return std::exp(-g * (x - y).squaredNorm());
    case KernelKind::Exponential: return std::exp(-g * (x - y).norm());
    case KernelKind::Sigmoid: return std::tanh(g * x.dot(y) + spec.coef0);
    case KernelKind::Precomputed:
    case KernelKind::Custom: break;
  }
  throw UnsupportedKernel(std::string(to_string(spec.kind)) + " kernels are supplied as Gram matrices");
}

inline double kernel_eval(const KernelSpec& spec, const std::vector<double>& x, const std::vector<double>& y) {
  return kernel_eval(spec, Eigen::Map<const Vector>(x.data(), Eigen::Index(x.size())),
                     Eigen::Map<const Vector>(y.data(), Eigen::Index(y.size())));
}

/// n x m matrix of kernel values. `symmetric` marks a self-Gram K(X, X).
struct GramMatrix {
  Matrix values;
  bool symmetric = false;

  GramMatrix() = default;
  explicit GramMatrix(Matrix v, bool sym = false) : values(std::move(v)), symmetric(sym) {
    if (!values.allFinite()) throw InvalidData("Gram matrix contains NaN or Inf");
  }

  /// Wrap a user-supplied square kernel matrix; symmetry is checked.
  static GramMatrix precomputed(Matrix v, double tol = 1e-9) {
    if (v.rows() != v.cols()) throw ShapeMismatch("precomputed Gram must be square");
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if ((v - v.transpose()).cwiseAbs().maxCoeff() > tol * scale)
      throw InvalidData("precomputed Gram is not symmetric");
    return GramMatrix(std::move(v), true);
  }

  Index rows() const noexcept { return Index(values.rows()); }
  Index cols() const noexcept { return Index(values.cols()); }
  bool square() const noexcept { return values.rows() == values.cols(); }
};

namespace detail {

inline Matrix gram_raw(const KernelSpec& spec, const RowMatrix& X, const RowMatrix& Y, bool self) {
  spec.validate();
  if (!spec.needs_data())
    throw UnsupportedKernel(std::string(to_string(spec.kind)) + " kernels are supplied as Gram matrices");
  const double g = spec.resolved_gamma(Index(X.cols()));
  const Eigen::Index n = X.rows(), m = Y.rows();
  Matrix K(n, m);
  if (spec.kind == KernelKind::Linear || spec.kind == KernelKind::Polynomial ||
      spec.kind == KernelKind::Sigmoid) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = self ? i : 0; j < m; ++j) {
        const double dot = X.row(i).dot(Y.row(j));
        double v = dot;
        if (spec.kind == KernelKind::Polynomial) v = std::pow(g * dot + spec.coef0, spec.degree);
        if (spec.kind == KernelKind::Sigmoid) v = std::tanh(g * dot + spec.coef0);
        K(i, j) = v;
        if (self) K(j, i) = v;
      }
    return K;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = self ? i : 0; j < m; ++j) {
      const double d2 = (X.row(i) - Y.row(j)).squaredNorm();
      const double v = spec.kind == KernelKind::Gaussian ? std::exp(-g * d2) : std::exp(-g * std::sqrt(d2));
      K(i, j) = v;
      if (self) K(j, i) = v;
    }
  return K;
}

}  // namespace detail

inline GramMatrix gram(const KernelSpec& spec, const SampleMatrix& X, const SampleMatrix& Y) {
  if (X.cols() != Y.cols())
    throw ShapeMismatch("gram: X has " + std::to_string(X.cols()) + " features, Y has " +
                        std::to_string(Y.cols()));
  const bool self = &X == &Y || (X.rows() == Y.rows() && X.values() == Y.values());
  return GramMatrix(detail::gram_raw(spec, X.values(), Y.values(), self), self);
}

inline GramMatrix gram(const KernelSpec& spec, const SampleMatrix& X) { return gram(spec, X, X); }

/// Statistics of a training Gram needed to center cross-Gram rows later.
struct GramCentering {
  Vector col_means;  // mean over training rows of each column
  double grand_mean = 0.0;
};

inline GramCentering centering_of(const GramMatrix& K) {
  if (!K.square()) throw ShapeMismatch("centering needs a square Gram matrix");
  GramCentering c;
  c.col_means = K.values.colwise().mean().transpose();
  c.grand_mean = K.values.mean();
  return c;
}

/// Feature-space centering K' = K - 1K - K1 + 1K1 with 1 the all-(1/n) matrix.
inline GramMatrix center_gram(const GramMatrix& K) {
  if (!K.square()) throw ShapeMismatch("center_gram needs a square matrix");
  const Vector row_means = K.values.rowwise().mean();
  const Vector col_means = K.values.colwise().mean().transpose();
  const double grand = K.values.mean();
  Matrix C = K.values;
  C.colwise() -= row_means;
  C.rowwise() -= col_means.transpose();
  C.array() += grand;
  // restore exact symmetry lost to rounding
  C = 0.5 * (C + C.transpose()).eval();
  return GramMatrix(std::move(C), true);
}

/// Center cross-Gram rows k(z, x_i) (m x n) against a training Gram.
inline Matrix center_cross_gram(const Matrix& Kz, const GramCentering& train) {
  if (Kz.cols() != train.col_means.size())
    throw ShapeMismatch("cross-Gram has " + std::to_string(Kz.cols()) + " columns, training set has " +
                        std::to_string(train.col_means.size()));
  Matrix C = Kz;
  const Vector row_means = Kz.rowwise().mean();
  C.colwise() -= row_means;
  C.rowwise() -= train.col_means.transpose();
  C.array() += train.grand_mean;
  return C;
}

}  // namespace mlcore
