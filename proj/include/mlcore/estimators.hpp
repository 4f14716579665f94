#pragma once

#include <charconv>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mlcore/feature_selection.hpp"
#include "mlcore/serialize.hpp"

namespace mlcore {

/// String-valued hyperparameters with typed lookups. Keys never read are
/// reported by check_consumed so that typos do not silently fall back to a
/// default.
class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string text(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    const auto v = optional_real(key);
    return v ? *v : fallback;
  }

  std::optional<double> optional_real(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    double v = 0.0;
    const auto& s = it->second;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
      throw InvalidParameter("parameter " + key + "='" + s + "' is not a number");
    return v;
  }

  Index count(const std::string& key, Index fallback) const {
    const auto v = optional_count(key);
    return v ? *v : fallback;
  }

  std::optional<Index> optional_count(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    unsigned long long v = 0;
    const auto& s = it->second;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
      throw InvalidParameter("parameter " + key + "='" + s + "' is not a non-negative integer");
    return Index(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw InvalidParameter("parameter " + key + "='" + it->second + "' is not a boolean");
  }

  void check_consumed(const std::string& owner) const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw InvalidParameter("unknown parameter '" + k + "' for " + owner);
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

inline KernelSpec kernel_from_params(const Params& p, const std::string& fallback = "linear") {
  KernelSpec k;
  k.kind = kernel_kind_from_string(p.text("kernel", fallback));
  if (k.kind == KernelKind::Custom || k.kind == KernelKind::Precomputed)
    throw InvalidParameter("kernel '" + std::string(to_string(k.kind)) + "' is not available from a config");
  k.gamma = p.optional_real("gamma");
  k.degree = int(p.count("degree", 3));
  k.coef0 = p.real("coef0", 0.0);
  k.validate();
  return k;
}

enum class EstimatorTask { Classification, Regression };

struct EstimatorSpec {
  std::string name;
  Params params;
};

struct CatalogEntry {
  std::string_view name;
  EstimatorTask task;
};

inline constexpr CatalogEntry estimator_catalog[] = {
    {"knn", EstimatorTask::Classification},         {"svm", EstimatorTask::Classification},
    {"lda", EstimatorTask::Classification},         {"dlda", EstimatorTask::Classification},
    {"qda", EstimatorTask::Classification},         {"fda", EstimatorTask::Classification},
    {"kfda", EstimatorTask::Classification},        {"srda", EstimatorTask::Classification},
    {"golub", EstimatorTask::Classification},       {"logistic", EstimatorTask::Classification},
    {"perceptron", EstimatorTask::Classification},  {"parzen", EstimatorTask::Classification},
    {"tree", EstimatorTask::Classification},        {"elastic_net_classifier", EstimatorTask::Classification},
    {"ols", EstimatorTask::Regression},             {"ridge", EstimatorTask::Regression},
    {"kernel_ridge", EstimatorTask::Regression},    {"elastic_net", EstimatorTask::Regression},
    {"lars", EstimatorTask::Regression},            {"pls", EstimatorTask::Regression},
    {"svr", EstimatorTask::Regression},
};

inline EstimatorTask estimator_task(std::string_view name) {
  for (const auto& e : estimator_catalog)
    if (e.name == name) return e.task;
  throw InvalidParameter("unknown estimator '" + std::string(name) + "'");
}

namespace detail {

inline SvmOptions svm_options(const Params& p) {
  SvmOptions o;
  o.C = p.real("C", o.C);
  o.tol = p.real("tol", o.tol);
  o.epsilon = p.real("epsilon", o.epsilon);
  return o;
}

inline ElasticNetOptions elastic_net_options(const Params& p) {
  ElasticNetOptions o;
  o.lambda1 = p.real("lambda1", o.lambda1);
  o.lambda2 = p.real("lambda2", o.lambda2);
  o.tol = p.real("tol", o.tol);
  o.max_iter = p.count("max_iter", o.max_iter);
  return o;
}

inline FittedModel fit_unchecked(const EstimatorSpec& s, const LabeledDataset& d) {
  const Params& p = s.params;
  const auto& n = s.name;
  if (n == "knn") return knn_fit(d, p.count("k", 1));
  if (n == "svm") return svc_train(d, kernel_from_params(p), svm_options(p));
  if (n == "svr") return svr_train(d, kernel_from_params(p), svm_options(p));
  if (n == "lda") return lda_fit(d, p.optional_real("reg"));
  if (n == "dlda") return dlda_fit(d, p.optional_real("reg"));
  if (n == "qda") return max_likelihood_fit(d, p.optional_real("reg"));
  if (n == "fda") return fda_fit(d, p.optional_real("reg"));
  if (n == "kfda") return kfda_fit(d, kernel_from_params(p, "gaussian"), p.optional_real("reg"));
  if (n == "srda") return srda_fit(d, p.real("alpha", 1.0));
  if (n == "golub") return golub_fit(d);
  if (n == "logistic") {
    LogisticOptions o;
    o.lambda = p.real("lambda", o.lambda);
    return logistic_fit(d, o);
  }
  if (n == "perceptron") return perceptron_fit(d, p.real("alpha", 0.1), p.count("epochs", 10000)).model;
  if (n == "parzen") return parzen_fit(d, kernel_from_params(p, "gaussian"));
  if (n == "tree") {
    TreeOptions o;
    o.min_leaf = p.count("min_leaf", o.min_leaf);
    o.max_depth = p.optional_count("max_depth");
    return tree_fit(d, o);
  }
  if (n == "elastic_net_classifier") return elastic_net_classifier_fit(d, elastic_net_options(p));
  if (n == "ols") return ols_fit(d);
  if (n == "ridge") return ridge_fit(d, p.real("lambda", 1.0));
  if (n == "kernel_ridge") return kernel_ridge_fit(d, kernel_from_params(p), p.real("lambda", 1.0));
  if (n == "elastic_net") return elastic_net_fit(d, elastic_net_options(p));
  if (n == "lars") return lars_fit(d, p.count("steps", d.features())).final_model();
  if (n == "pls") return pls_fit(d, p.count("components", 1)).as_linear();
  throw InvalidParameter("unknown estimator '" + n + "'");
}

}  // namespace detail

/// Fits a catalog estimator. Hyperparameters the estimator never reads are
/// rejected.
inline FittedModel fit_estimator(const EstimatorSpec& s, const LabeledDataset& d) {
  estimator_task(s.name);
  EstimatorSpec probe{s.name, Params(s.params.values())};
  auto m = detail::fit_unchecked(probe, d);
  probe.params.check_consumed("estimator " + s.name);
  return m;
}

inline bool is_predictor(const FittedModel& m) {
  return !std::holds_alternative<PcaModel>(m) && !std::holds_alternative<KpcaModel>(m);
}

/// True when predict_model returns class labels.
inline bool is_classifier(const FittedModel& m) {
  if (const auto* l = std::get_if<LinearModel>(&m)) return l->classes.size() == 2;
  if (const auto* s = std::get_if<SvmModel>(&m)) return s->task == SvmTask::Classification;
  return is_predictor(m) && !std::holds_alternative<DualModel>(m);
}

/// Labels (as doubles) for classifiers, values for regressors.
inline Vector predict_model(const FittedModel& model, const SampleMatrix& X) {
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>)
          return linear_predict(m, X, m.classes.size() == 2 ? Task::Classification : Task::Regression);
        else if constexpr (std::is_same_v<T, DualModel>)
          return kernel_ridge_predict(m, X);
        else if constexpr (std::is_same_v<T, GaussianClassModel>)
          return LabeledDataset::to_vector(gaussian_predict(m, X));
        else if constexpr (std::is_same_v<T, DiscriminantDirection>)
          return LabeledDataset::to_vector(fda_predict(m, X));
        else if constexpr (std::is_same_v<T, KfdaModel>)
          return LabeledDataset::to_vector(kfda_predict(m, X));
        else if constexpr (std::is_same_v<T, SrdaModel>)
          return LabeledDataset::to_vector(srda_predict(m, X));
        else if constexpr (std::is_same_v<T, SvmModel>)
          return m.task == SvmTask::Classification ? LabeledDataset::to_vector(svm_predict(m, X)) : svr_predict(m, X);
        else if constexpr (std::is_same_v<T, KnnModel>)
          return LabeledDataset::to_vector(knn_predict(m, X));
        else if constexpr (std::is_same_v<T, ParzenModel>)
          return LabeledDataset::to_vector(parzen_predict(m, X));
        else if constexpr (std::is_same_v<T, TreeModel>)
          return LabeledDataset::to_vector(tree_predict(m, X));
        else
          throw InvalidParameter(std::string(to_string(kind_of(model))) + " models do not predict; use transform");
      },
      model);
}

// ---- feature ranking ----

struct RankingSpec {
  std::string method;  // rfe, kfda_rfe, irelief, golub
  Params params;
};

inline constexpr std::string_view ranking_methods[] = {"rfe", "kfda_rfe", "irelief", "golub"};

namespace detail {

inline LinearTrainer rfe_trainer(const Params& p) {
  const std::string base = p.text("estimator", "svm");
  if (base == "svm") {
    const SvmOptions o = svm_options(p);
    return [o](const LabeledDataset& d) { return linear_svc_fit(d, o); };
  }
  if (base == "ridge") {
    const double lambda = p.real("lambda", 1.0);
    return [lambda](const LabeledDataset& d) { return ridge_fit(d, lambda); };
  }
  if (base == "golub") return [](const LabeledDataset& d) { return golub_fit(d); };
  if (base == "logistic") {
    LogisticOptions o;
    o.lambda = p.real("lambda", o.lambda);
    return [o](const LabeledDataset& d) { return logistic_fit(d, o); };
  }
  if (base == "elastic_net") {
    const ElasticNetOptions o = elastic_net_options(p);
    return [o](const LabeledDataset& d) { return elastic_net_classifier_fit(d, o); };
  }
  throw InvalidParameter("rfe estimator must be svm, ridge, golub, logistic or elastic_net, got '" + base + "'");
}

}  // namespace detail

/// Full ranking of every feature of d; order[0] is the most relevant.
inline FeatureRanking rank_features(const RankingSpec& s, const LabeledDataset& d) {
  const Params p(s.params.values());
  FeatureRanking r;
  if (s.method == "rfe") {
    const auto trainer = detail::rfe_trainer(p);
    r = rfe(trainer, d, p.count("step", 1));
  } else if (s.method == "kfda_rfe") {
    const auto kernel = kernel_from_params(p, "gaussian");
    r = kfda_rfe(kernel, d, p.optional_real("reg"), p.count("step", 1));
  } else if (s.method == "irelief") {
    IReliefOptions o;
    o.sigma = p.real("sigma", o.sigma);
    o.max_iter = p.count("max_iter", o.max_iter);
    o.tol = p.real("tol", o.tol);
    r = ranking_from_scores(irelief(d, o).weights);
  } else if (s.method == "golub") {
    r = ranking_from_scores(golub_fit(d).weights.cwiseAbs());
  } else {
    throw InvalidParameter("unknown ranking method '" + s.method + "'");
  }
  p.check_consumed("ranking " + s.method);
  return r;
}

}  // namespace mlcore
