#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/kernels.hpp"
#include "mlcore/linalg.hpp"

namespace mlcore {

enum class Task { Regression, Classification };

/// Hyperplane w.x + b. Classification models carry their two-class table
/// (negative class first); regression models leave it empty.
struct LinearModel {
  Vector weights;
  double intercept = 0.0;
  std::vector<Label> classes;

  Index features() const noexcept { return Index(weights.size()); }
};

inline Vector linear_decision(const LinearModel& m, const SampleMatrix& X) {
  if (X.cols() != m.features())
    throw ShapeMismatch("model expects " + std::to_string(m.features()) + " features, got " +
                        std::to_string(X.cols()));
  Vector out = X.values() * m.weights;
  out.array() += m.intercept;
  return out;
}

/// Sign of the decision value decoded to labels; a zero decision goes to the
/// positive (larger) class.
inline std::vector<Label> linear_classify(const LinearModel& m, const SampleMatrix& X) {
  const Vector f = linear_decision(m, X);
  const Label neg = m.classes.size() == 2 ? m.classes[0] : -1;
  const Label pos = m.classes.size() == 2 ? m.classes[1] : 1;
  std::vector<Label> out(Index(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) out[Index(i)] = f[i] >= 0.0 ? pos : neg;
  return out;
}

/// Regression: X w + b. Classification: decoded labels, returned as doubles.
inline Vector linear_predict(const LinearModel& m, const SampleMatrix& X, Task task) {
  if (task == Task::Regression) return linear_decision(m, X);
  const auto labels = linear_classify(m, X);
  return LabeledDataset::to_vector(labels);
}

namespace detail {

inline LabelEncoder binary_encoder(const LabeledDataset& d, const char* who) {
  LabelEncoder enc(d.labels());
  if (!enc.binary())
    throw InvalidLabels(std::string(who) + " is binary-only, got " + std::to_string(enc.num_classes()) +
                        " classes");
  return enc;
}

inline double soft_threshold(double z, double t) noexcept {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Least squares family

/// Ordinary least squares with intercept. Rank-deficient designs get the
/// minimum-norm weight vector.
inline LinearModel ols_fit(const LabeledDataset& d) {
  if (d.size() < 2) throw InvalidParameter("ols needs at least 2 samples");
  const auto [xm, Xc] = linalg::center_columns(linalg::to_col_major(d.x));
  const double ym = d.y.mean();
  const Vector yc = d.y.array() - ym;
  LinearModel m;
  m.weights = linalg::lstsq(Xc, yc);
  m.intercept = ym - xm.dot(m.weights);
  return m;
}

/// Ridge regression; the intercept is not penalized.
inline LinearModel ridge_fit(const LabeledDataset& d, double lambda = 1.0) {
  if (!(lambda >= 0.0)) throw InvalidParameter("ridge lambda must be >= 0");
  if (lambda == 0.0) return ols_fit(d);
  const auto [xm, Xc] = linalg::center_columns(linalg::to_col_major(d.x));
  const double ym = d.y.mean();
  const Vector yc = d.y.array() - ym;
  const Eigen::Index n = Xc.rows(), p = Xc.cols();
  LinearModel m;
  if (p <= n) {
    Matrix A = Xc.transpose() * Xc;
    A.diagonal().array() += lambda;
    m.weights = linalg::spd_solve(A, Xc.transpose() * yc, "ridge system");
  } else {
    Matrix A = Xc * Xc.transpose();
    A.diagonal().array() += lambda;
    m.weights = Xc.transpose() * linalg::spd_solve(A, yc, "ridge system");
  }
  m.intercept = ym - xm.dot(m.weights);
  return m;
}

/// Kernel ridge regression in the dual. The training Gram is centered in
/// feature space so the implicit intercept stays unpenalized.
struct DualModel {
  Vector dual_coefs;
  double intercept = 0.0;
  KernelSpec kernel;
  GramCentering centering;
  RowMatrix training_inputs;  // empty for precomputed kernels

  Index training_size() const noexcept { return Index(dual_coefs.size()); }
};

inline DualModel kernel_ridge_fit(const GramMatrix& K, const Vector& y, double lambda = 1.0) {
  if (!K.square()) throw ShapeMismatch("kernel ridge needs a square Gram matrix");
  if (Index(y.size()) != K.rows()) throw ShapeMismatch("target length != Gram size");
  if (!(lambda >= 0.0)) throw InvalidParameter("kernel ridge lambda must be > 0");
  DualModel m;
  m.kernel = KernelSpec::precomputed();
  m.centering = centering_of(K);
  m.intercept = y.mean();
  Matrix A = center_gram(K).values;
  A.diagonal().array() += lambda;
  const Vector yc = y.array() - m.intercept;
  try {
    m.dual_coefs = linalg::spd_solve(A, yc, "kernel ridge system");
  } catch (const SingularCovariance& e) {
    throw InvalidParameter(std::string("singular kernel ridge system (lambda=0?): ") + e.what());
  }
  return m;
}

inline DualModel kernel_ridge_fit(const LabeledDataset& d, const KernelSpec& kernel, double lambda = 1.0) {
  DualModel m = kernel_ridge_fit(gram(kernel, d.x), d.y, lambda);
  m.kernel = kernel;
  m.training_inputs = d.x.values();
  return m;
}

/// Predict from cross-Gram rows k(z_r, x_i), one row per query.
inline Vector kernel_ridge_predict(const DualModel& m, const Matrix& cross_gram) {
  Vector out = center_cross_gram(cross_gram, m.centering) * m.dual_coefs;
  out.array() += m.intercept;
  return out;
}

inline Vector kernel_ridge_predict(const DualModel& m, const SampleMatrix& X) {
  if (m.training_inputs.size() == 0)
    throw UnsupportedKernel("model was fit on a precomputed Gram; pass cross-Gram rows");
  if (Eigen::Index(X.cols()) != m.training_inputs.cols()) throw ShapeMismatch("feature count mismatch");
  return kernel_ridge_predict(m, detail::gram_raw(m.kernel, X.values(), m.training_inputs, false));
}

// ---------------------------------------------------------------------------
// Elastic net

struct ElasticNetOptions {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double tol = 1e-6;
  Index max_iter = 10000;
};

/// Solver diagnostics in the standardized coordinates the solver works in.
struct ElasticNetTrace {
  Vector standardized_weights;
  std::vector<double> objective;  // after each sweep
  Index sweeps = 0;
  bool converged = false;
};

struct StandardizedDesign {
  Matrix z;  // zero-mean, unit (1/n) variance columns; constant columns zeroed
  Vector mean;
  Vector scale;  // 0 for constant columns
  Vector y_centered;
  double y_mean = 0.0;
};

inline StandardizedDesign standardize(const LabeledDataset& d) {
  StandardizedDesign s;
  auto [mean, Xc] = linalg::center_columns(linalg::to_col_major(d.x));
  const double n = double(d.size());
  s.mean = std::move(mean);
  s.scale = (Xc.colwise().squaredNorm() / n).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < Xc.cols(); ++j) {
    if (s.scale[j] > 1e-12 * std::max(1.0, s.mean.cwiseAbs()[j])) {
      Xc.col(j) /= s.scale[j];
    } else {
      s.scale[j] = 0.0;
      Xc.col(j).setZero();
    }
  }
  s.z = std::move(Xc);
  s.y_mean = d.y.mean();
  s.y_centered = d.y.array() - s.y_mean;
  return s;
}

/// (1/2n)||y - Zw||^2 + l1 ||w||_1 + (l2/2) ||w||^2 on standardized data.
inline double elastic_net_objective(const Matrix& z, const Vector& y, const Vector& w, double l1, double l2) {
  const double n = double(z.rows());
  return (y - z * w).squaredNorm() / (2.0 * n) + l1 * w.lpNorm<1>() + 0.5 * l2 * w.squaredNorm();
}

/// Cyclic coordinate descent for the naive elastic net. Columns are
/// standardized internally; converged when no coefficient moves by tol or more.
inline LinearModel elastic_net_fit(const LabeledDataset& d, const ElasticNetOptions& opt = {},
                                   ElasticNetTrace* trace = nullptr) {
  if (!(opt.lambda1 >= 0.0) || !(opt.lambda2 >= 0.0))
    throw InvalidParameter("elastic net penalties must be >= 0");
  if (!(opt.tol > 0.0)) throw InvalidParameter("elastic net tol must be > 0");
  const StandardizedDesign s = standardize(d);
  const Eigen::Index n = s.z.rows(), p = s.z.cols();
  Vector w = Vector::Zero(p);
  Vector r = s.y_centered;
  ElasticNetTrace local;
  ElasticNetTrace& tr = trace ? *trace : local;
  tr = {};
  for (Index sweep = 0; sweep < opt.max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.scale[j] == 0.0) continue;
      const double rho = s.z.col(j).dot(r) / double(n) + w[j];
      const double next = detail::soft_threshold(rho, opt.lambda1) / (1.0 + opt.lambda2);
      const double delta = next - w[j];
      if (delta != 0.0) {
        r.noalias() -= delta * s.z.col(j);
        w[j] = next;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    tr.objective.push_back(elastic_net_objective(s.z, s.y_centered, w, opt.lambda1, opt.lambda2));
    tr.sweeps = sweep + 1;
    if (max_change < opt.tol) {
      tr.converged = true;
      break;
    }
  }
  tr.standardized_weights = w;
  LinearModel m;
  m.weights = Vector::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (s.scale[j] > 0.0) m.weights[j] = w[j] / s.scale[j];
  m.intercept = s.y_mean - s.mean.dot(m.weights);
  if (!tr.converged)
    throw NotConvergedWith<LinearModel>(
        "elastic net: no convergence after " + std::to_string(opt.max_iter) + " sweeps", m);
  return m;
}

/// Elastic-net classifier: regression on -1/+1 encoded labels, predict by sign.
inline LinearModel elastic_net_classifier_fit(const LabeledDataset& d, const ElasticNetOptions& opt = {}) {
  const LabelEncoder enc = detail::binary_encoder(d, "elastic net classifier");
  LinearModel m = elastic_net_fit(LabeledDataset(d.x, enc.encode(d.labels())), opt);
  m.classes = enc.classes();
  return m;
}

// ---------------------------------------------------------------------------
// LARS

struct LarsStep {
  Index entered;
  Vector coefficients;  // original feature scale
  double intercept;
};

struct LarsPath {
  std::vector<LarsStep> steps;

  LinearModel model(Index step) const {
    if (step >= steps.size()) throw InvalidParameter("LARS step out of range");
    return {steps[step].coefficients, steps[step].intercept, {}};
  }
  LinearModel final_model() const {
    if (steps.empty()) throw InvalidParameter("empty LARS path");
    return model(steps.size() - 1);
  }
  std::vector<Index> entry_order() const {
    std::vector<Index> out;
    for (const auto& s : steps) out.push_back(s.entered);
    return out;
  }
};

/// Basic forward LARS (no lasso drops). Columns are centered and scaled to
/// unit norm internally; each step adds one feature, and the last possible
/// step takes the full least-squares step on the active set.
inline LarsPath lars_fit(const LabeledDataset& d, Index max_steps) {
  auto [xm, Z] = linalg::center_columns(linalg::to_col_major(d.x));
  const Eigen::Index n = Z.rows(), p = Z.cols();
  Vector norms = Z.colwise().norm().transpose();
  std::vector<bool> usable(Index(p), false);
  Index n_usable = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (norms[j] > 1e-12) {
      Z.col(j) /= norms[j];
      usable[Index(j)] = true;
      ++n_usable;
    } else {
      Z.col(j).setZero();
    }
  }
  const double ym = d.y.mean();
  const Vector yc = d.y.array() - ym;
  const Index limit = std::min<Index>({max_steps, Index(p), n_usable, Index(std::max<Eigen::Index>(n - 1, 1))});

  LarsPath path;
  std::vector<Index> active;
  std::vector<bool> in_active(Index(p), false);
  Vector mu = Vector::Zero(n);
  Vector beta = Vector::Zero(p);  // standardized scale

  auto to_original = [&](const Vector& b) {
    Vector w = Vector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
      if (usable[Index(j)]) w[j] = b[j] / norms[j];
    return w;
  };

  std::optional<Index> next;
  {
    const Vector c = Z.transpose() * yc;
    double best = -1.0;
    for (Eigen::Index j = 0; j < p; ++j)
      if (usable[Index(j)] && std::abs(c[j]) > best) {
        best = std::abs(c[j]);
        next = Index(j);
      }
  }
  for (Index step = 0; step < limit && next; ++step) {
    const Index entered = *next;
    active.push_back(entered);
    in_active[entered] = true;
    next.reset();

    const Vector c = Z.transpose() * (yc - mu);
    const auto k = Eigen::Index(active.size());
    Matrix XA(n, k);
    Vector sgn(k);
    double C = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      const auto j = Eigen::Index(active[Index(a)]);
      sgn[a] = c[j] >= 0 ? 1.0 : -1.0;
      XA.col(a) = sgn[a] * Z.col(j);
      C = std::max(C, std::abs(c[j]));
    }
    const Matrix G = XA.transpose() * XA;
    const Vector g1 = linalg::lstsq(G, Vector::Ones(k));
    const double AA = 1.0 / std::sqrt(std::max(g1.sum(), 1e-300));
    const Vector w = AA * g1;
    const Vector u = XA * w;
    const Vector a = Z.transpose() * u;

    double gamma = C / AA;
    if (step + 1 < limit) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!usable[Index(j)] || in_active[Index(j)]) continue;
        for (double cand : {(C - c[j]) / (AA - a[j]), (C + c[j]) / (AA + a[j])}) {
          if (cand > 1e-14 && cand < best) {
            best = cand;
            next = Index(j);
          }
        }
      }
      if (next) gamma = std::min(best, gamma);
    }
    mu += gamma * u;
    for (Eigen::Index q = 0; q < k; ++q) beta[Eigen::Index(active[Index(q)])] += gamma * sgn[q] * w[q];
    Vector coef = to_original(beta);
    const double b0 = ym - xm.dot(coef);
    path.steps.push_back({entered, std::move(coef), b0});
  }
  return path;
}

// ---------------------------------------------------------------------------
// PLS1

struct PlsModel {
  Index n_components = 0;
  Matrix x_weights;   // p x A
  Matrix x_loadings;  // p x A
  Vector y_loadings;  // A
  Vector x_mean;
  double y_mean = 0.0;
  Vector coefficients;  // p, on centered inputs

  LinearModel as_linear() const { return {coefficients, y_mean - x_mean.dot(coefficients), {}}; }
};

/// Single-response PLS via NIPALS deflation. A component whose weight
/// direction vanishes (X'y = 0 after deflation) ends the sequence early.
inline PlsModel pls_fit(const LabeledDataset& d, Index n_components) {
  const Index n = d.size(), p = d.features();
  if (n_components < 1 || n_components > std::min(n - 1, p))
    throw InvalidParameter("pls components must be in [1, min(n-1, p)] = [1, " +
                           std::to_string(std::min(n - 1, p)) + "]");
  auto [xm, X] = linalg::center_columns(linalg::to_col_major(d.x));
  PlsModel m;
  m.x_mean = xm;
  m.y_mean = d.y.mean();
  Vector y = d.y.array() - m.y_mean;
  const double scale = std::max(1.0, X.norm() * y.norm());
  std::vector<Vector> W, P;
  std::vector<double> Q;
  for (Index a = 0; a < n_components; ++a) {
    Vector w = X.transpose() * y;
    const double wn = w.norm();
    if (wn <= 1e-12 * scale) break;
    w /= wn;
    const Vector t = X * w;
    const double tt = t.squaredNorm();
    if (tt <= 1e-300) break;
    const Vector pl = X.transpose() * t / tt;
    const double q = y.dot(t) / tt;
    X -= t * pl.transpose();
    y -= q * t;
    W.push_back(w);
    P.push_back(pl);
    Q.push_back(q);
  }
  const auto A = Eigen::Index(W.size());
  m.n_components = Index(A);
  m.x_weights.resize(Eigen::Index(p), A);
  m.x_loadings.resize(Eigen::Index(p), A);
  m.y_loadings.resize(A);
  for (Eigen::Index a = 0; a < A; ++a) {
    m.x_weights.col(a) = W[Index(a)];
    m.x_loadings.col(a) = P[Index(a)];
    m.y_loadings[a] = Q[Index(a)];
  }
  if (A == 0) {
    m.coefficients = Vector::Zero(Eigen::Index(p));
  } else {
    const Matrix PtW = m.x_loadings.transpose() * m.x_weights;
    m.coefficients = m.x_weights * PtW.partialPivLu().solve(m.y_loadings);
  }
  return m;
}

inline Vector pls_predict(const PlsModel& m, const SampleMatrix& X) {
  return linear_decision(m.as_linear(), X);
}

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticOptions {
  double lambda = 0.01;
  double tol = 1e-6;
  Index max_iter = 10000;
};

struct LogisticObjective {
  double value;
  Vector gradient;  // weights then intercept
};

/// Mean logistic loss plus (lambda/2)||w||^2 for -1/+1 targets.
inline LogisticObjective logistic_objective(const Matrix& X, const Vector& ypm, const Vector& w, double b,
                                            double lambda) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Vector z = (X * w).array() + b;
  double loss = 0.0;
  Vector coef(n);  // d loss_i / d z_i
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = ypm[i] * z[i];
    loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    const double s = m > 0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
    coef[i] = -ypm[i] * s;
  }
  LogisticObjective out;
  out.value = loss / double(n) + 0.5 * lambda * w.squaredNorm();
  out.gradient.resize(p + 1);
  out.gradient.head(p) = X.transpose() * coef / double(n) + lambda * w;
  out.gradient[p] = coef.sum() / double(n);
  return out;
}

/// Damped Newton on the regularized logistic loss (intercept unpenalized).
inline LinearModel logistic_fit(const LabeledDataset& d, const LogisticOptions& opt = {}) {
  if (!(opt.lambda >= 0.0)) throw InvalidParameter("logistic lambda must be >= 0");
  const LabelEncoder enc = detail::binary_encoder(d, "logistic regression");
  const Vector ypm = enc.encode(d.labels());
  const Matrix X = linalg::to_col_major(d.x);
  const Eigen::Index n = X.rows(), p = X.cols();
  Matrix Xt(n, p + 1);
  Xt.leftCols(p) = X;
  Xt.col(p).setOnes();
  Vector theta = Vector::Zero(p + 1);
  LinearModel m;
  m.classes = enc.classes();
  auto eval = [&](const Vector& t) { return logistic_objective(X, ypm, t.head(p), t[p], opt.lambda); };
  LogisticObjective cur = eval(theta);
  for (Index it = 0; it < opt.max_iter; ++it) {
    if (cur.gradient.norm() < opt.tol) {
      m.weights = theta.head(p);
      m.intercept = theta[p];
      return m;
    }
    const Vector z = Xt * theta;
    Vector curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      curv[i] = s * (1.0 - s);
    }
    Matrix H = Xt.transpose() * curv.asDiagonal() * Xt / double(n);
    H.diagonal().head(p).array() += opt.lambda;
    H.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    const Vector step = H.ldlt().solve(-cur.gradient);
    double t = 1.0;
    const double slope = cur.gradient.dot(step);
    LogisticObjective trial = eval(theta + step);
    while (trial.value > cur.value + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      trial = eval(theta + t * step);
    }
    if (!(trial.value <= cur.value)) break;  // no further descent possible
    theta += t * step;
    cur = std::move(trial);
  }
  m.weights = theta.head(p);
  m.intercept = theta[p];
  if (cur.gradient.norm() < opt.tol) return m;
  throw NotConvergedWith<LinearModel>("logistic regression: gradient norm " +
                                          std::to_string(cur.gradient.norm()) + " above tol",
                                      m);
}

/// P(positive class | x).
inline Vector logistic_probability(const LinearModel& m, const SampleMatrix& X) {
  const Vector z = linear_decision(m, X);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// ---------------------------------------------------------------------------
// Perceptron

struct PerceptronFit {
  LinearModel model;
  Index epochs_run = 0;
  Index training_errors = 0;  // mistakes of the final model on the training set
  bool separated = false;     // last pass was mistake-free
};

/// Mistake-driven perceptron in fixed sample order. A sample with
/// y (w.x + b) <= 0 counts as a mistake.
inline PerceptronFit perceptron_fit(const LabeledDataset& d, double alpha = 0.1, Index epochs = 10000,
                                    const std::optional<LinearModel>& initial = std::nullopt) {
  if (!(alpha > 0.0)) throw InvalidParameter("perceptron learning rate must be > 0");
  const LabelEncoder enc = detail::binary_encoder(d, "perceptron");
  const Vector ypm = enc.encode(d.labels());
  const RowMatrix& X = d.x.values();
  PerceptronFit fit;
  fit.model.classes = enc.classes();
  fit.model.weights = Vector::Zero(X.cols());
  if (initial) {
    if (initial->features() != d.features()) throw ShapeMismatch("initial model feature count mismatch");
    fit.model.weights = initial->weights;
    fit.model.intercept = initial->intercept;
  }
  Vector& w = fit.model.weights;
  double& b = fit.model.intercept;
  for (Index e = 0; e < epochs; ++e) {
    Index mistakes = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (ypm[i] * (X.row(i).dot(w) + b) <= 0.0) {
        w += alpha * ypm[i] * X.row(i).transpose();
        b += alpha * ypm[i];
        ++mistakes;
      }
    }
    fit.epochs_run = e + 1;
    if (mistakes == 0) {
      fit.separated = true;
      break;
    }
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) fit.training_errors += ypm[i] * (X.row(i).dot(w) + b) <= 0.0;
  return fit;
}

}  // namespace mlcore
