#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/kernels.hpp"
#include "mlcore/linalg.hpp"
#include "mlcore/linear.hpp"

namespace mlcore {

enum class CovarianceKind { PooledFull, PooledDiagonal, PerClassFull };

/// Per-class Gaussian model. Covariances already include the ridge `reg`:
/// one shared matrix for the pooled kinds, one per class otherwise.
struct GaussianClassModel {
  CovarianceKind kind = CovarianceKind::PooledFull;
  std::vector<Label> classes;
  Matrix means;  // c x p
  Vector priors;
  std::vector<Matrix> covariances;
  double reg = 0.0;
};

namespace detail {

struct ClassStats {
  LabelEncoder enc;
  std::vector<std::vector<Index>> members;
  Matrix means;  // c x p
  Vector priors;
};

inline ClassStats class_stats(const LabeledDataset& d) {
  ClassStats s{LabelEncoder(d.labels()), {}, {}, {}};
  const auto idx = s.enc.indices(d.labels());
  const auto c = Eigen::Index(s.enc.num_classes());
  s.members.resize(Index(c));
  for (Index i = 0; i < idx.size(); ++i) s.members[idx[i]].push_back(i);
  s.means = Matrix::Zero(c, Eigen::Index(d.features()));
  s.priors.resize(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    for (Index i : s.members[Index(k)]) s.means.row(k) += d.x.row(i);
    s.means.row(k) /= double(s.members[Index(k)].size());
    s.priors[k] = double(s.members[Index(k)].size()) / double(d.size());
  }
  return s;
}

inline Matrix scatter(const LabeledDataset& d, const std::vector<Index>& rows, const Vector& mean) {
  const auto p = Eigen::Index(d.features());
  Matrix S = Matrix::Zero(p, p);
  for (Index i : rows) {
    const Vector v = d.x.row(i).transpose() - mean;
    S.noalias() += v * v.transpose();
  }
  return S;
}

inline double default_reg(const Matrix& S) { return 1e-6 * S.trace() / double(S.rows()); }

inline Index argmax_lowest(const Eigen::Ref<const Vector>& v) {
  Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v[k] > v[Eigen::Index(best)]) best = Index(k);
  return best;
}

inline GaussianClassModel pooled_fit(const LabeledDataset& d, std::optional<double> reg, bool diagonal) {
  if (reg && !(*reg >= 0.0)) throw InvalidParameter("reg must be >= 0");
  const ClassStats s = class_stats(d);
  const auto p = Eigen::Index(d.features());
  Matrix S = Matrix::Zero(p, p);
  for (Index k = 0; k < s.members.size(); ++k) S += scatter(d, s.members[k], s.means.row(Eigen::Index(k)).transpose());
  const double dof = std::max(1.0, double(d.size()) - double(s.members.size()));
  S /= dof;
  if (diagonal) S = Matrix(S.diagonal().asDiagonal());
  GaussianClassModel m;
  m.kind = diagonal ? CovarianceKind::PooledDiagonal : CovarianceKind::PooledFull;
  m.classes = s.enc.classes();
  m.means = s.means;
  m.priors = s.priors;
  m.reg = reg.value_or(default_reg(S));
  S.diagonal().array() += m.reg;
  // fail at fit time, not at predict time
  linalg::spd_solve(S, Vector::Zero(p), diagonal ? "diagonal pooled covariance" : "pooled covariance");
  m.covariances.push_back(std::move(S));
  return m;
}

}  // namespace detail

inline GaussianClassModel lda_fit(const LabeledDataset& d, std::optional<double> reg = std::nullopt) {
  return detail::pooled_fit(d, reg, false);
}

inline GaussianClassModel dlda_fit(const LabeledDataset& d, std::optional<double> reg = std::nullopt) {
  return detail::pooled_fit(d, reg, true);
}

/// Full per-class Gaussian (quadratic) classifier.
inline GaussianClassModel max_likelihood_fit(const LabeledDataset& d, std::optional<double> reg = std::nullopt) {
  if (reg && !(*reg >= 0.0)) throw InvalidParameter("reg must be >= 0");
  const detail::ClassStats s = detail::class_stats(d);
  GaussianClassModel m;
  m.kind = CovarianceKind::PerClassFull;
  m.classes = s.enc.classes();
  m.means = s.means;
  m.priors = s.priors;
  std::vector<Matrix> covs;
  double avg_trace = 0.0;
  for (Index k = 0; k < s.members.size(); ++k) {
    if (s.members[k].size() < 2)
      throw InvalidLabels("class " + std::to_string(m.classes[k]) + " has fewer than 2 samples");
    Matrix S = detail::scatter(d, s.members[k], s.means.row(Eigen::Index(k)).transpose());
    S /= double(s.members[k].size() - 1);
    avg_trace += S.trace() / double(s.members.size());
    covs.push_back(std::move(S));
  }
  m.reg = reg.value_or(1e-6 * avg_trace / double(d.features()));
  for (auto& S : covs) {
    S.diagonal().array() += m.reg;
    linalg::spd_solve(S, Vector::Zero(S.rows()), "class covariance");
  }
  m.covariances = std::move(covs);
  return m;
}

/// n x c matrix of discriminant scores; the predicted class maximizes its row.
inline Matrix discriminant_scores(const GaussianClassModel& m, const SampleMatrix& X) {
  const Eigen::Index c = m.means.rows(), p = m.means.cols();
  if (Eigen::Index(X.cols()) != p) throw ShapeMismatch("feature count mismatch");
  const Matrix Xm(X.values());
  Matrix scores(Xm.rows(), c);
  if (m.kind != CovarianceKind::PerClassFull) {
    const Matrix& S = m.covariances.front();
    const Matrix W = linalg::spd_solve(S, m.means.transpose());  // p x c, columns Sigma^-1 mu_c
    for (Eigen::Index k = 0; k < c; ++k) {
      const double offset = -0.5 * m.means.row(k).dot(W.col(k)) + std::log(m.priors[k]);
      scores.col(k) = (Xm * W.col(k)).array() + offset;
    }
    return scores;
  }
  for (Eigen::Index k = 0; k < c; ++k) {
    const Eigen::LLT<Matrix> llt(m.covariances[Index(k)]);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    Matrix D = Xm.rowwise() - m.means.row(k);
    const Matrix Z = llt.matrixL().solve(D.transpose());  // p x n
    scores.col(k) = (-0.5 * Z.colwise().squaredNorm().array() - 0.5 * logdet + std::log(m.priors[k])).transpose();
  }
  return scores;
}

/// argmax of the discriminant scores; ties go to the lowest class index.
inline std::vector<Label> gaussian_predict(const GaussianClassModel& m, const SampleMatrix& X) {
  const Matrix s = discriminant_scores(m, X);
  std::vector<Label> out(Index(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) out[Index(i)] = m.classes[detail::argmax_lowest(s.row(i).transpose())];
  return out;
}

/// Golub's signal-to-noise weights (mu+ - mu-)/(s+ + s-) with the decision
/// hyperplane through the midpoint of the class means. A feature whose
/// summed stdev is 0 gets weight 0.
inline LinearModel golub_fit(const LabeledDataset& d) {
  const LabelEncoder enc = detail::binary_encoder(d, "golub");
  const auto labels = d.labels();
  const auto p = Eigen::Index(d.features());
  std::vector<Index> neg, pos;
  for (Index i = 0; i < labels.size(); ++i) (enc.encode(labels[i]) > 0 ? pos : neg).push_back(i);
  if (neg.size() < 2 || pos.size() < 2) throw InvalidLabels("golub needs at least 2 samples per class");
  auto moments = [&](const std::vector<Index>& rows) {
    Vector mean = Vector::Zero(p), sd = Vector::Zero(p);
    for (Index i : rows) mean += d.x.row(i).transpose();
    mean /= double(rows.size());
    for (Index i : rows) sd += (d.x.row(i).transpose() - mean).cwiseAbs2();
    sd = (sd / double(rows.size() - 1)).cwiseSqrt();
    return std::pair{mean, sd};
  };
  const auto [mp, sp] = moments(pos);
  const auto [mn, sn] = moments(neg);
  LinearModel m;
  m.classes = enc.classes();
  m.weights = Vector::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double s = sp[j] + sn[j];
    m.weights[j] = s > 0.0 ? (mp[j] - mn[j]) / s : 0.0;
  }
  m.intercept = -m.weights.dot(0.5 * (mp + mn));
  return m;
}

// ---------------------------------------------------------------------------
// Fisher discriminants

/// Projection direction plus the threshold separating the two classes;
/// projections at or above the threshold go to the positive (larger) class.
struct DiscriminantDirection {
  Vector direction;
  double threshold = 0.0;
  std::vector<Label> classes;
};

inline Vector fda_project(const DiscriminantDirection& m, const SampleMatrix& X) {
  if (Eigen::Index(X.cols()) != m.direction.size()) throw ShapeMismatch("feature count mismatch");
  return X.values() * m.direction;
}

inline std::vector<Label> fda_predict(const DiscriminantDirection& m, const SampleMatrix& X) {
  const Vector z = fda_project(m, X);
  std::vector<Label> out(Index(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[Index(i)] = z[i] >= m.threshold ? m.classes[1] : m.classes[0];
  return out;
}

/// Within-class scatter S_w (unnormalized) for a binary problem.
inline Matrix within_class_scatter(const LabeledDataset& d) {
  const detail::ClassStats s = detail::class_stats(d);
  Matrix S = Matrix::Zero(Eigen::Index(d.features()), Eigen::Index(d.features()));
  for (Index k = 0; k < s.members.size(); ++k) S += detail::scatter(d, s.members[k], s.means.row(Eigen::Index(k)).transpose());
  return S;
}

/// Binary Fisher discriminant: direction (S_w + reg I)^-1 (mu+ - mu-),
/// unit norm, threshold at the projected midpoint of the class means.
inline DiscriminantDirection fda_fit(const LabeledDataset& d, std::optional<double> reg = std::nullopt) {
  if (reg && !(*reg >= 0.0)) throw InvalidParameter("reg must be >= 0");
  const detail::ClassStats s = detail::class_stats(d);
  if (!s.enc.binary()) throw InvalidLabels("fda is binary-only");
  Matrix S = within_class_scatter(d);
  S.diagonal().array() += reg.value_or(detail::default_reg(S));
  const Vector diff = (s.means.row(1) - s.means.row(0)).transpose();
  DiscriminantDirection m;
  m.classes = s.enc.classes();
  m.direction = linalg::spd_solve(S, diff, "within-class scatter");
  const double norm = m.direction.norm();
  if (!(norm > 0.0)) throw SingularCovariance("fda: identical class means give no direction");
  m.direction /= norm;
  m.threshold = 0.5 * (s.means.row(0).dot(m.direction) + s.means.row(1).dot(m.direction));
  return m;
}

/// Kernel Fisher discriminant in the dual: coefficients over the training
/// samples, projection of z is sum_i alpha_i k(x_i, z).
struct KfdaModel {
  Vector dual_coefs;
  double threshold = 0.0;
  std::vector<Label> classes;
  double reg = 0.0;
  KernelSpec kernel = KernelSpec::precomputed();
  RowMatrix training_inputs;  // empty when fit from a Gram matrix
};

namespace detail {

struct KfdaScatter {
  Matrix within;      // N
  Vector mean_diff;   // M+ - M-
  Vector mean_neg, mean_pos;
};

inline KfdaScatter kfda_scatter(const Matrix& K, const std::vector<Index>& neg, const std::vector<Index>& pos) {
  const Eigen::Index n = K.rows();
  KfdaScatter s{Matrix::Zero(n, n), {}, Vector::Zero(n), Vector::Zero(n)};
  for (Index i : neg) s.mean_neg += K.col(Eigen::Index(i));
  for (Index i : pos) s.mean_pos += K.col(Eigen::Index(i));
  s.mean_neg /= double(neg.size());
  s.mean_pos /= double(pos.size());
  for (const auto* group : {&neg, &pos}) {
    const Vector& mc = group == &neg ? s.mean_neg : s.mean_pos;
    Matrix Kc(n, Eigen::Index(group->size()));
    for (Index j = 0; j < group->size(); ++j) Kc.col(Eigen::Index(j)) = K.col(Eigen::Index((*group)[j])) - mc;
    s.within.noalias() += Kc * Kc.transpose();
  }
  s.mean_diff = s.mean_pos - s.mean_neg;
  return s;
}

inline std::pair<std::vector<Index>, std::vector<Index>> split_binary(const LabelEncoder& enc,
                                                                      std::span<const Label> labels) {
  std::vector<Index> neg, pos;
  for (Index i = 0; i < labels.size(); ++i) (enc.encode(labels[i]) > 0 ? pos : neg).push_back(i);
  return {neg, pos};
}

}  // namespace detail

/// Rayleigh quotient (alpha'(M+ - M-))^2 / alpha'(N + reg I) alpha of dual
/// coefficients against a Gram matrix.
inline double kfda_rayleigh_quotient(const GramMatrix& K, std::span<const Label> labels, const Vector& alpha,
                                     double reg) {
  const LabelEncoder enc(labels);
  const auto [neg, pos] = detail::split_binary(enc, labels);
  const auto s = detail::kfda_scatter(K.values, neg, pos);
  const double num = std::pow(alpha.dot(s.mean_diff), 2);
  const double den = alpha.dot(s.within * alpha) + reg * alpha.squaredNorm();
  return den > 0.0 ? num / den : 0.0;
}

inline KfdaModel kfda_fit(const GramMatrix& K, std::span<const Label> labels, std::optional<double> reg = std::nullopt) {
  if (!K.square()) throw ShapeMismatch("kfda needs a square Gram matrix");
  if (labels.size() != K.rows()) throw ShapeMismatch("label count != Gram size");
  if (reg && !(*reg > 0.0)) throw InvalidParameter("kfda reg must be > 0");
  const LabelEncoder enc(labels);
  if (!enc.binary()) throw InvalidLabels("kfda is binary-only");
  const auto [neg, pos] = detail::split_binary(enc, labels);
  const auto s = detail::kfda_scatter(K.values, neg, pos);
  KfdaModel m;
  m.classes = enc.classes();
  m.reg = reg.value_or(std::max(1e-9 * s.within.trace(), 1e-12));
  Matrix A = s.within;
  A.diagonal().array() += m.reg;
  m.dual_coefs = linalg::spd_solve(A, s.mean_diff, "kfda within-class scatter", 0.0);
  m.threshold = 0.5 * (m.dual_coefs.dot(s.mean_neg) + m.dual_coefs.dot(s.mean_pos));
  return m;
}

inline KfdaModel kfda_fit(const LabeledDataset& d, const KernelSpec& kernel, std::optional<double> reg = std::nullopt) {
  KfdaModel m = kfda_fit(gram(kernel, d.x), d.labels(), reg);
  m.kernel = kernel;
  m.training_inputs = d.x.values();
  return m;
}

/// Projections from cross-Gram rows k(z_r, x_i).
inline Vector kfda_project(const KfdaModel& m, const Matrix& cross_gram) {
  if (cross_gram.cols() != m.dual_coefs.size()) throw ShapeMismatch("cross-Gram width != training size");
  return cross_gram * m.dual_coefs;
}

inline Vector kfda_project(const KfdaModel& m, const SampleMatrix& X) {
  if (m.training_inputs.size() == 0)
    throw UnsupportedKernel("model was fit on a precomputed Gram; pass cross-Gram rows");
  if (Eigen::Index(X.cols()) != m.training_inputs.cols()) throw ShapeMismatch("feature count mismatch");
  return kfda_project(m, detail::gram_raw(m.kernel, X.values(), m.training_inputs, false));
}

template <typename Input>
std::vector<Label> kfda_predict(const KfdaModel& m, const Input& input) {
  const Vector z = kfda_project(m, input);
  std::vector<Label> out(Index(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[Index(i)] = z[i] >= m.threshold ? m.classes[1] : m.classes[0];
  return out;
}

// ---------------------------------------------------------------------------
// Spectral regression discriminant analysis

struct SrdaModel {
  std::vector<Label> classes;
  Vector mean;
  Matrix directions;  // p x (c-1)
  Matrix centroids;   // c x (c-1), class means in the projected space
};

/// Class-indicator responses orthogonalized (Gram-Schmidt) against the
/// constant vector and each other; the vector that collapses is dropped,
/// leaving c-1 orthonormal responses as columns.
inline Matrix srda_responses(std::span<const Label> labels) {
  const LabelEncoder enc(labels);
  const auto idx = enc.indices(labels);
  const auto n = Eigen::Index(labels.size());
  std::vector<Vector> basis{Vector::Constant(n, 1.0 / std::sqrt(double(n)))};
  std::vector<Vector> kept;
  for (Index k = 0; k < enc.num_classes(); ++k) {
    Vector v = Vector::Zero(n);
    for (Index i = 0; i < idx.size(); ++i) v[Eigen::Index(i)] = idx[i] == k ? 1.0 : 0.0;
    for (const auto& b : basis) v -= b.dot(v) * b;
    const double norm = v.norm();
    if (norm < 1e-10) continue;
    v /= norm;
    basis.push_back(v);
    kept.push_back(v);
  }
  Matrix R(n, Eigen::Index(kept.size()));
  for (Index k = 0; k < kept.size(); ++k) R.col(Eigen::Index(k)) = kept[k];
  return R;
}

inline SrdaModel srda_fit(const LabeledDataset& d, double alpha = 1.0) {
  if (!(alpha >= 0.0)) throw InvalidParameter("srda alpha must be >= 0");
  const auto labels = d.labels();
  const Matrix R = srda_responses(labels);
  auto [mean, Xc] = linalg::center_columns(linalg::to_col_major(d.x));
  SrdaModel m;
  m.classes = LabelEncoder(labels).classes();
  m.mean = mean;
  if (alpha == 0.0) {
    m.directions = linalg::lstsq(Xc, R);
  } else if (Xc.cols() <= Xc.rows()) {
    Matrix A = Xc.transpose() * Xc;
    A.diagonal().array() += alpha;
    m.directions = linalg::spd_solve(A, Xc.transpose() * R, "srda system");
  } else {
    Matrix A = Xc * Xc.transpose();
    A.diagonal().array() += alpha;
    m.directions = Xc.transpose() * linalg::spd_solve(A, R, "srda system");
  }
  const Matrix Z = Xc * m.directions;
  const auto idx = LabelEncoder(labels).indices(labels);
  m.centroids = Matrix::Zero(Eigen::Index(m.classes.size()), Z.cols());
  std::vector<double> counts(m.classes.size(), 0.0);
  for (Index i = 0; i < idx.size(); ++i) {
    m.centroids.row(Eigen::Index(idx[i])) += Z.row(Eigen::Index(i));
    counts[idx[i]] += 1.0;
  }
  for (Index k = 0; k < counts.size(); ++k) m.centroids.row(Eigen::Index(k)) /= counts[k];
  return m;
}

inline Matrix srda_transform(const SrdaModel& m, const SampleMatrix& X) {
  if (Eigen::Index(X.cols()) != m.mean.size()) throw ShapeMismatch("feature count mismatch");
  return (Matrix(X.values()).rowwise() - m.mean.transpose()) * m.directions;
}

/// Nearest projected class centroid; ties to the lowest class index.
inline std::vector<Label> srda_predict(const SrdaModel& m, const SampleMatrix& X) {
  const Matrix Z = srda_transform(m, X);
  std::vector<Label> out(Index(Z.rows()));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m.centroids.rows(); ++k) {
      const double dist = (Z.row(i) - m.centroids.row(k)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = Index(k);
      }
    }
    out[Index(i)] = m.classes[best];
  }
  return out;
}

}  // namespace mlcore
