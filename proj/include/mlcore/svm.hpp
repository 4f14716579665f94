#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/kernels.hpp"
#include "mlcore/linear.hpp"

namespace mlcore {

enum class SvmTask { Classification, Regression };

struct SvmOptions {
  double C = 1.0;
  double tol = 1e-3;
  double epsilon = 0.1;  // regression tube half-width
  std::uint64_t max_kernel_evaluations = 10'000'000;
};

/// Result of one dual solve: min 1/2 a'Qa + p'a, y'a = 0, 0 <= a <= C.
struct SmoResult {
  Vector alpha;
  Vector gradient;
  double rho = 0.0;
  double objective = 0.0;
  Index iterations = 0;
  bool converged = false;
};

/// One binary machine. `support` holds column positions into the owning
/// model's support_indices; f(x) = sum coefs_j k(sv_j, x) - rho.
struct BinarySvm {
  Label negative = 0, positive = 0;
  std::vector<Index> support;
  Vector coefs;
  double rho = 0.0;
  double objective = 0.0;
  Index iterations = 0;
};

struct SvmModel {
  SvmTask task = SvmTask::Classification;
  KernelSpec kernel;
  double C = 1.0;
  double epsilon = 0.0;
  std::vector<Label> classes;
  Index training_size = 0;
  Index features = 0;
  std::vector<Index> support_indices;  // sorted, into the training set
  RowMatrix support_vectors;           // empty for precomputed kernels
  std::vector<BinarySvm> machines;     // pairs (a, b), a < b, in index order

  Index num_support() const noexcept { return support_indices.size(); }
};

namespace detail {

/// Dual over variables t with base row base[t] of K and sign y[t]:
/// Q_st = y_s y_t K(base_s, base_t).
struct SmoProblem {
  const Matrix& K;
  std::vector<Index> base;
  Vector y;
  Vector p;
  double C;
};

inline SmoResult smo_solve(const SmoProblem& pr, double tol, std::uint64_t max_iter) {
  constexpr double tau = 1e-12;
  const Index l = pr.base.size();
  const double C = pr.C;
  auto k = [&](Index s, Index t) { return pr.K(Eigen::Index(pr.base[s]), Eigen::Index(pr.base[t])); };
  auto y = [&](Index t) { return pr.y[Eigen::Index(t)]; };
  SmoResult r;
  r.alpha = Vector::Zero(Eigen::Index(l));
  r.gradient = pr.p;
  Vector& a = r.alpha;
  Vector& G = r.gradient;
  auto up = [&](Index t) { return y(t) > 0 ? a[Eigen::Index(t)] < C : a[Eigen::Index(t)] > 0.0; };
  auto low = [&](Index t) { return y(t) > 0 ? a[Eigen::Index(t)] > 0.0 : a[Eigen::Index(t)] < C; };

  while (true) {
    double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
    Index i = l, j = l;
    for (Index t = 0; t < l; ++t) {
      const double v = -y(t) * G[Eigen::Index(t)];
      if (up(t) && v > gmax) gmax = v, i = t;
      if (low(t) && -v > gmax2) gmax2 = -v, j = t;
    }
    if (i == l || j == l || gmax + gmax2 < tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= max_iter) break;
    ++r.iterations;

    const auto I = Eigen::Index(i), J = Eigen::Index(j);
    const double qij = y(i) * y(j) * k(i, j);
    const double old_i = a[I], old_j = a[J];
    if (y(i) != y(j)) {
      double quad = k(i, i) + k(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-G[I] - G[J]) / quad;
      const double diff = a[I] - a[J];
      a[I] += delta;
      a[J] += delta;
      if (diff > 0.0) {
        if (a[J] < 0.0) a[J] = 0.0, a[I] = diff;
      } else if (a[I] < 0.0) {
        a[I] = 0.0, a[J] = -diff;
      }
      if (diff > 0.0) {
        if (a[I] > C) a[I] = C, a[J] = C - diff;
      } else if (a[J] > C) {
        a[J] = C, a[I] = C + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (G[I] - G[J]) / quad;
      const double sum = a[I] + a[J];
      a[I] -= delta;
      a[J] += delta;
      if (sum > C) {
        if (a[I] > C) a[I] = C, a[J] = sum - C;
      } else if (a[J] < 0.0) {
        a[J] = 0.0, a[I] = sum;
      }
      if (sum > C) {
        if (a[J] > C) a[J] = C, a[I] = sum - C;
      } else if (a[I] < 0.0) {
        a[I] = 0.0, a[J] = sum;
      }
    }
    const double di = a[I] - old_i, dj = a[J] - old_j;
    for (Index t = 0; t < l; ++t)
      G[Eigen::Index(t)] += y(t) * (y(i) * k(t, i) * di + y(j) * k(t, j) * dj);
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  Index free = 0;
  for (Index t = 0; t < l; ++t) {
    const double yg = y(t) * G[Eigen::Index(t)];
    const double at = a[Eigen::Index(t)];
    if (at >= C) {
      if (y(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at <= 0.0) {
      if (y(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  r.rho = free > 0 ? sum_free / double(free) : 0.5 * (ub + lb);
  r.objective = 0.5 * a.dot(G + pr.p);
  return r;
}

inline std::uint64_t iteration_cap(const SvmOptions& o, Index n) {
  return std::max<std::uint64_t>(100, o.max_kernel_evaluations / std::max<std::uint64_t>(1, 2 * n));
}

inline void validate(const SvmOptions& o, bool regression) {
  if (!(o.C > 0.0)) throw InvalidParameter("svm C must be > 0");
  if (!(o.tol > 0.0)) throw InvalidParameter("svm tol must be > 0");
  if (regression && !(o.epsilon >= 0.0)) throw InvalidParameter("svr epsilon must be >= 0");
}

/// Collects the support set over all machines and rewrites machine supports
/// from training indices to columns of the union.
inline void finalize_support(SvmModel& m, std::vector<std::vector<Index>>& train_support, const RowMatrix* X) {
  std::vector<Index> all;
  for (const auto& s : train_support) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  m.support_indices = all;
  for (Index k = 0; k < m.machines.size(); ++k) {
    auto& sup = m.machines[k].support;
    sup.clear();
    for (Index t : train_support[k])
      sup.push_back(Index(std::lower_bound(all.begin(), all.end(), t) - all.begin()));
  }
  if (X) {
    m.support_vectors.resize(Eigen::Index(all.size()), X->cols());
    for (Index r = 0; r < all.size(); ++r) m.support_vectors.row(Eigen::Index(r)) = X->row(Eigen::Index(all[r]));
  }
}

inline SvmModel svc_from_gram(const Matrix& K, std::span<const Label> labels, const SvmOptions& o,
                              const RowMatrix* X) {
  validate(o, false);
  const LabelEncoder enc(labels);
  const auto idx = enc.indices(labels);
  SvmModel m;
  m.task = SvmTask::Classification;
  m.C = o.C;
  m.classes = enc.classes();
  m.training_size = labels.size();
  std::vector<std::vector<Index>> train_support;
  const Index c = enc.num_classes();
  for (Index a = 0; a < c; ++a)
    for (Index b = a + 1; b < c; ++b) {
      SmoProblem pr{K, {}, {}, {}, o.C};
      for (Index t = 0; t < idx.size(); ++t)
        if (idx[t] == a || idx[t] == b) pr.base.push_back(t);
      const auto l = Eigen::Index(pr.base.size());
      pr.y.resize(l);
      for (Eigen::Index t = 0; t < l; ++t) pr.y[t] = idx[pr.base[Index(t)]] == b ? 1.0 : -1.0;
      pr.p = Vector::Constant(l, -1.0);
      const SmoResult r = smo_solve(pr, o.tol, iteration_cap(o, pr.base.size()));
      BinarySvm mach;
      mach.negative = m.classes[a];
      mach.positive = m.classes[b];
      mach.rho = r.rho;
      mach.objective = r.objective;
      mach.iterations = r.iterations;
      std::vector<Index> sup;
      std::vector<double> coef;
      for (Eigen::Index t = 0; t < l; ++t)
        if (r.alpha[t] > 0.0) {
          sup.push_back(pr.base[Index(t)]);
          coef.push_back(r.alpha[t] * pr.y[t]);
        }
      mach.coefs = Eigen::Map<const Vector>(coef.data(), Eigen::Index(coef.size()));
      m.machines.push_back(std::move(mach));
      train_support.push_back(std::move(sup));
      if (!r.converged) {
        finalize_support(m, train_support, X);
        throw NotConvergedWith<SvmModel>("smo did not converge for classes " + std::to_string(m.classes[a]) +
                                             "/" + std::to_string(m.classes[b]) + " after " +
                                             std::to_string(r.iterations) + " iterations",
                                         m);
      }
    }
  finalize_support(m, train_support, X);
  return m;
}

inline SvmModel svr_from_gram(const Matrix& K, const Vector& z, const SvmOptions& o, const RowMatrix* X) {
  validate(o, true);
  const Index n = Index(z.size());
  SmoProblem pr{K, {}, Vector(Eigen::Index(2 * n)), Vector(Eigen::Index(2 * n)), o.C};
  for (Index t = 0; t < 2 * n; ++t) pr.base.push_back(t % n);
  for (Eigen::Index t = 0; t < Eigen::Index(n); ++t) {
    pr.y[t] = 1.0;
    pr.y[t + Eigen::Index(n)] = -1.0;
    pr.p[t] = o.epsilon - z[t];
    pr.p[t + Eigen::Index(n)] = o.epsilon + z[t];
  }
  const SmoResult r = smo_solve(pr, o.tol, iteration_cap(o, n));
  SvmModel m;
  m.task = SvmTask::Regression;
  m.C = o.C;
  m.epsilon = o.epsilon;
  m.training_size = n;
  BinarySvm mach;
  mach.rho = r.rho;
  mach.objective = r.objective;
  mach.iterations = r.iterations;
  std::vector<Index> sup;
  std::vector<double> coef;
  for (Eigen::Index t = 0; t < Eigen::Index(n); ++t) {
    const double c = r.alpha[t] - r.alpha[t + Eigen::Index(n)];
    if (c != 0.0) {
      sup.push_back(Index(t));
      coef.push_back(c);
    }
  }
  mach.coefs = Eigen::Map<const Vector>(coef.data(), Eigen::Index(coef.size()));
  m.machines.push_back(std::move(mach));
  std::vector<std::vector<Index>> train_support{std::move(sup)};
  finalize_support(m, train_support, X);
  if (!r.converged)
    throw NotConvergedWith<SvmModel>("smo (regression) did not converge after " + std::to_string(r.iterations) +
                                         " iterations",
                                     m);
  return m;
}

}  // namespace detail

inline SvmModel svc_train(const GramMatrix& K, std::span<const Label> labels, const SvmOptions& o = {}) {
  if (!K.square()) throw ShapeMismatch("svc needs a square Gram matrix");
  if (labels.size() != K.rows()) throw ShapeMismatch("label count != Gram size");
  SvmModel m = detail::svc_from_gram(K.values, labels, o, nullptr);
  m.kernel = KernelSpec::precomputed();
  return m;
}

inline SvmModel svc_train(const LabeledDataset& d, const KernelSpec& kernel, const SvmOptions& o = {}) {
  kernel.validate();
  const GramMatrix K = gram(kernel, d.x);
  const auto labels = d.labels();
  try {
    SvmModel m = detail::svc_from_gram(K.values, labels, o, &d.x.values());
    m.kernel = kernel;
    m.features = d.x.cols();
    return m;
  } catch (NotConvergedWith<SvmModel>& e) {
    SvmModel m = e.last_iterate();
    m.kernel = kernel;
    m.features = d.x.cols();
    throw NotConvergedWith<SvmModel>(e.what(), std::move(m));
  }
}

inline SvmModel svr_train(const GramMatrix& K, const Vector& y, const SvmOptions& o = {}) {
  if (!K.square()) throw ShapeMismatch("svr needs a square Gram matrix");
  if (Index(y.size()) != K.rows()) throw ShapeMismatch("target length != Gram size");
  SvmModel m = detail::svr_from_gram(K.values, y, o, nullptr);
  m.kernel = KernelSpec::precomputed();
  return m;
}

inline SvmModel svr_train(const LabeledDataset& d, const KernelSpec& kernel, const SvmOptions& o = {}) {
  kernel.validate();
  const GramMatrix K = gram(kernel, d.x);
  try {
    SvmModel m = detail::svr_from_gram(K.values, d.y, o, &d.x.values());
    m.kernel = kernel;
    m.features = d.x.cols();
    return m;
  } catch (NotConvergedWith<SvmModel>& e) {
    SvmModel m = e.last_iterate();
    m.kernel = kernel;
    m.features = d.x.cols();
    throw NotConvergedWith<SvmModel>(e.what(), std::move(m));
  }
}

/// Decision values, one column per machine, from cross-Gram rows against the
/// full training set (precomputed kernels) or from samples.
inline Matrix svm_decision(const SvmModel& m, const Matrix& cross_gram) {
  if (Index(cross_gram.cols()) != m.training_size)
    throw ShapeMismatch("cross-Gram needs " + std::to_string(m.training_size) + " columns, got " +
                        std::to_string(cross_gram.cols()));
  Matrix Ks(cross_gram.rows(), Eigen::Index(m.num_support()));
  for (Index s = 0; s < m.num_support(); ++s)
    Ks.col(Eigen::Index(s)) = cross_gram.col(Eigen::Index(m.support_indices[s]));
  Matrix out(cross_gram.rows(), Eigen::Index(m.machines.size()));
  for (Index k = 0; k < m.machines.size(); ++k) {
    const auto& mach = m.machines[k];
    for (Eigen::Index r = 0; r < Ks.rows(); ++r) {
      double f = 0.0;
      for (Index s = 0; s < mach.support.size(); ++s)
        f += mach.coefs[Eigen::Index(s)] * Ks(r, Eigen::Index(mach.support[s]));
      out(r, Eigen::Index(k)) = f - mach.rho;
    }
  }
  return out;
}

inline Matrix svm_decision(const SvmModel& m, const SampleMatrix& X) {
  if (!m.kernel.needs_data()) throw UnsupportedKernel("precomputed-kernel model needs cross-Gram rows");
  if (X.cols() != m.features)
    throw ShapeMismatch("model expects " + std::to_string(m.features) + " features, got " +
                        std::to_string(X.cols()));
  const Matrix Ks = detail::gram_raw(m.kernel, X.values(), m.support_vectors, false);
  Matrix out(Ks.rows(), Eigen::Index(m.machines.size()));
  for (Index k = 0; k < m.machines.size(); ++k) {
    const auto& mach = m.machines[k];
    for (Eigen::Index r = 0; r < Ks.rows(); ++r) {
      double f = 0.0;
      for (Index s = 0; s < mach.support.size(); ++s)
        f += mach.coefs[Eigen::Index(s)] * Ks(r, Eigen::Index(mach.support[s]));
      out(r, Eigen::Index(k)) = f - mach.rho;
    }
  }
  return out;
}

/// One-vs-one voting; f >= 0 votes for the larger class of the pair and vote
/// ties go to the lowest class index.
template <class Input>
std::vector<Label> svm_predict(const SvmModel& m, const Input& input) {
  if (m.task != SvmTask::Classification) throw InvalidParameter("svm_predict needs a classification model");
  const Matrix f = svm_decision(m, input);
  const Index c = m.classes.size();
  std::vector<Label> out(Index(f.rows()));
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    std::vector<Index> votes(c, 0);
    Index k = 0;
    for (Index a = 0; a < c; ++a)
      for (Index b = a + 1; b < c; ++b, ++k) ++votes[f(r, Eigen::Index(k)) >= 0.0 ? b : a];
    out[Index(r)] = m.classes[Index(std::max_element(votes.begin(), votes.end()) - votes.begin())];
  }
  return out;
}

template <class Input>
Vector svr_predict(const SvmModel& m, const Input& input) {
  if (m.task != SvmTask::Regression) throw InvalidParameter("svr_predict needs a regression model");
  return svm_decision(m, input).col(0);
}

/// Primal hyperplanes w = sum a_i y_i x_i, b = -rho, one per machine.
inline std::vector<LinearModel> linear_weights(const SvmModel& m) {
  if (m.kernel.kind != KernelKind::Linear)
    throw UnsupportedKernel("hyperplane extraction needs a linear kernel, model uses " +
                            std::string(to_string(m.kernel.kind)));
  std::vector<LinearModel> out;
  for (const auto& mach : m.machines) {
    LinearModel lm;
    lm.weights = Vector::Zero(Eigen::Index(m.features));
    for (Index s = 0; s < mach.support.size(); ++s)
      lm.weights += mach.coefs[Eigen::Index(s)] * m.support_vectors.row(Eigen::Index(mach.support[s])).transpose();
    lm.intercept = -mach.rho;
    if (m.task == SvmTask::Classification) lm.classes = {mach.negative, mach.positive};
    out.push_back(std::move(lm));
  }
  return out;
}

/// Binary large-margin linear classifier: linear-kernel SMO plus hyperplane
/// extraction.
inline LinearModel linear_svc_fit(const LabeledDataset& d, const SvmOptions& o = {}) {
  detail::binary_encoder(d, "linear svc");
  return linear_weights(svc_train(d, KernelSpec::linear(), o)).front();
}

}  // namespace mlcore
