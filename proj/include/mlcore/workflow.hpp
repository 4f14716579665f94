#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mlcore/clustering.hpp"
#include "mlcore/csv.hpp"
#include "mlcore/estimators.hpp"

namespace mlcore {

enum class WorkflowTask { Classify, Regress, Reduce, Cluster, Rank, Stability, Transform };

inline constexpr std::string_view to_string(WorkflowTask t) noexcept {
  switch (t) {
    case WorkflowTask::Classify: return "classify";
    case WorkflowTask::Regress: return "regress";
    case WorkflowTask::Reduce: return "reduce";
    case WorkflowTask::Cluster: return "cluster";
    case WorkflowTask::Rank: return "rank";
    case WorkflowTask::Stability: return "stability";
    case WorkflowTask::Transform: return "transform";
  }
  return "?";
}

inline WorkflowTask workflow_task_from_string(std::string_view s) {
  for (auto t : {WorkflowTask::Classify, WorkflowTask::Regress, WorkflowTask::Reduce, WorkflowTask::Cluster,
                 WorkflowTask::Rank, WorkflowTask::Stability, WorkflowTask::Transform})
    if (to_string(t) == s) return t;
  throw InvalidParameter("unknown workflow task '" + std::string(s) + "'");
}

enum class ResamplingScheme { KFold, MonteCarlo, Resubstitution };

inline constexpr std::string_view to_string(ResamplingScheme s) noexcept {
  switch (s) {
    case ResamplingScheme::KFold: return "kfold";
    case ResamplingScheme::MonteCarlo: return "montecarlo";
    case ResamplingScheme::Resubstitution: return "resubstitution";
  }
  return "?";
}

struct ResamplingSpec {
  ResamplingScheme scheme = ResamplingScheme::KFold;
  Index folds = 5;
  Index repeats = 1;
  bool stratified = true;
  Index replicates = 10;
  double train_fraction = 0.7;
};

struct PreprocessSpec {
  bool standardize = false;
  Index pca = 0;  // components kept; 0 disables
};

struct WorkflowConfig {
  WorkflowTask task = WorkflowTask::Classify;
  std::optional<std::uint64_t> seed;
  Index threads = 1;
  std::string data_path;
  CsvOptions csv;
  EstimatorSpec estimator;
  ResamplingSpec resampling;
  PreprocessSpec preprocess;
  std::optional<RankingSpec> ranking;
  Index keep = 0;  // features kept after ranking; 0 keeps all
  std::string report_path;
  std::string records_path;
  std::string data_output_path;

  void validate() const;
};

// ---- instrumentation ----

/// Seen by hooks just before a feature ranking or an estimator is fit.
/// `data` is exactly what the fitting step receives.
struct FitEvent {
  Index replicate = 0;
  Index fold = 0;
  std::span<const Index> train_rows;
  std::span<const Index> test_rows;
  const LabeledDataset& data;
};

/// With threads > 1 hooks run on worker threads and must be thread-safe.
struct WorkflowHooks {
  std::function<void(const FitEvent&)> before_selection;
  std::function<void(const FitEvent&)> before_fit;
  std::function<void(Index replicate, bool ok)> replicate_done;
};

// ---- report ----

struct ReplicateRecord {
  Index index = 0;
  bool ok = true;
  std::string error_kind;
  std::string message;
  double error = 0.0;  // misclassification rate or mean squared error
  Index evaluated = 0;
  std::vector<std::vector<Index>> rankings;  // one per fold, full orders
  std::optional<ConfusionMatrix> confusion;
};

struct WorkflowReport {
  WorkflowTask task = WorkflowTask::Classify;
  std::string estimator;
  std::uint64_t seed = 0;
  Index samples = 0;
  Index features = 0;
  std::string resampling;
  std::vector<ReplicateRecord> replicates;
  std::optional<double> mean_error;
  std::optional<double> stdev_error;
  std::optional<double> baseline_error;
  std::optional<ConfusionMatrix> confusion;
  std::optional<StabilityResult> stability;
  std::vector<std::pair<std::string, double>> metrics;  // task-specific extras, in output order
  std::vector<Index> assignments;                      // cluster task
  std::optional<RowMatrix> output_data;                // transform task

  bool failed() const {
    return std::any_of(replicates.begin(), replicates.end(), [](const ReplicateRecord& r) { return !r.ok; });
  }
  Index failures() const {
    return Index(std::count_if(replicates.begin(), replicates.end(), [](const ReplicateRecord& r) { return !r.ok; }));
  }
};

// ---- config ----

inline void WorkflowConfig::validate() const {
  if (!seed) throw InvalidParameter("workflow seed is mandatory");
  if (threads < 1) throw InvalidParameter("threads must be >= 1");
  switch (task) {
    case WorkflowTask::Classify:
    case WorkflowTask::Regress: {
      const auto want = task == WorkflowTask::Classify ? EstimatorTask::Classification : EstimatorTask::Regression;
      if (estimator_task(estimator.name) != want)
        throw InvalidParameter("estimator '" + estimator.name + "' does not fit task " + std::string(to_string(task)));
      break;
    }
    case WorkflowTask::Rank:
    case WorkflowTask::Stability:
      if (!ranking) throw InvalidParameter(std::string(to_string(task)) + " needs a [ranking] section");
      break;
    case WorkflowTask::Reduce:
    case WorkflowTask::Transform:
      if (estimator.name != "pca" && estimator.name != "kpca")
        throw InvalidParameter(std::string(to_string(task)) + " needs estimator pca or kpca, got '" + estimator.name + "'");
      break;
    case WorkflowTask::Cluster:
      if (estimator.name != "kmeans" && estimator.name != "hierarchical")
        throw InvalidParameter("cluster needs estimator kmeans or hierarchical, got '" + estimator.name + "'");
      break;
  }
  if (ranking && std::find(std::begin(ranking_methods), std::end(ranking_methods), ranking->method) ==
                     std::end(ranking_methods))
    throw InvalidParameter("unknown ranking method '" + ranking->method + "'");
  if (resampling.scheme == ResamplingScheme::KFold && (resampling.folds < 2 || resampling.repeats < 1))
    throw InvalidParameter("kfold needs folds >= 2 and repeats >= 1");
  if (resampling.scheme == ResamplingScheme::MonteCarlo && resampling.replicates < 1)
    throw InvalidParameter("montecarlo needs replicates >= 1");
}

namespace detail {

using boost::property_tree::ptree;

inline std::string text_value(const ptree& section, const std::string& key, const std::string& fallback) {
  const auto v = section.get_optional<std::string>(key);
  return v ? *v : fallback;
}

inline void reject_unknown_keys(const ptree& section, const std::string& name, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : section) {
    if (!value.empty()) throw ParseError("section [" + name + "] cannot nest key '" + key + "'", 0);
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InvalidParameter("unknown key '" + key + "' in section [" + name + "]");
  }
}

inline Params params_of(const ptree& section, std::initializer_list<std::string_view> skip) {
  Params p;
  for (const auto& [key, value] : section)
    if (std::find(skip.begin(), skip.end(), key) == skip.end()) p.set(key, value.data());
  return p;
}

}  // namespace detail

/// INI text: sections [workflow] [data] [estimator] [resampling] [preprocess]
/// [ranking] [output]. Relative paths are resolved against `base_dir`.
inline WorkflowConfig parse_workflow_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), e.line());
  }
  for (const auto& [name, section] : tree)
    if (name != "workflow" && name != "data" && name != "estimator" && name != "resampling" &&
        name != "preprocess" && name != "ranking" && name != "output")
      throw InvalidParameter(section.empty() ? "config key '" + name + "' outside any section"
                                             : "unknown config section [" + name + "]");

  const Params all_fields = [&] {
    Params p;
    for (const auto& [name, section] : tree)
      if (name != "estimator" && name != "ranking")
        for (const auto& [key, value] : section) p.set(name + "." + key, value.data());
    return p;
  }();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return (path.is_absolute() || base_dir.empty() ? path : base_dir / path).string();
  };

  const pt::ptree empty;
  auto section = [&](const char* name) -> const pt::ptree& {
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };

  WorkflowConfig c;
  detail::reject_unknown_keys(section("workflow"), "workflow", {"task", "seed", "threads"});
  detail::reject_unknown_keys(section("data"), "data", {"path", "header", "delimiter", "label_column"});
  detail::reject_unknown_keys(section("resampling"), "resampling",
                              {"scheme", "folds", "repeats", "stratified", "replicates", "train_fraction"});
  detail::reject_unknown_keys(section("preprocess"), "preprocess", {"standardize", "pca"});
  detail::reject_unknown_keys(section("output"), "output", {"report", "records", "data"});

  c.task = workflow_task_from_string(all_fields.text("workflow.task", "classify"));
  if (const auto s = all_fields.optional_count("workflow.seed")) c.seed = std::uint64_t(*s);
  c.threads = all_fields.count("workflow.threads", 1);

  c.data_path = resolve(all_fields.text("data.path", ""));
  c.csv.header = all_fields.flag("data.header", false);
  const std::string delim = all_fields.text("data.delimiter", ",");
  if (delim == "tab" || delim == "\\t") c.csv.delimiter = '\t';
  else if (delim.size() == 1) c.csv.delimiter = delim[0];
  else throw InvalidParameter("delimiter must be one character or 'tab'");
  const std::string label = all_fields.text("data.label_column", "last");
  if (label == "last") c.csv.label_column = -1;
  else if (label == "none") c.csv.label_column = std::nullopt;
  else {
    long v = 0;
    const auto [end, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
    if (ec != std::errc() || end != label.data() + label.size())
      throw InvalidParameter("label_column must be an integer, 'last' or 'none'");
    c.csv.label_column = v;
  }

  const auto& est = section("estimator");
  c.estimator.name = detail::text_value(est, "name", "");
  c.estimator.params = detail::params_of(est, {"name"});

  const std::string scheme = all_fields.text("resampling.scheme", "kfold");
  if (scheme == "kfold") c.resampling.scheme = ResamplingScheme::KFold;
  else if (scheme == "montecarlo") c.resampling.scheme = ResamplingScheme::MonteCarlo;
  else if (scheme == "resubstitution" || scheme == "none") c.resampling.scheme = ResamplingScheme::Resubstitution;
  else throw InvalidParameter("unknown resampling scheme '" + scheme + "'");
  c.resampling.folds = all_fields.count("resampling.folds", c.resampling.folds);
  c.resampling.repeats = all_fields.count("resampling.repeats", c.resampling.repeats);
  c.resampling.stratified = all_fields.flag("resampling.stratified", c.resampling.stratified);
  c.resampling.replicates = all_fields.count("resampling.replicates", c.resampling.replicates);
  c.resampling.train_fraction = all_fields.real("resampling.train_fraction", c.resampling.train_fraction);

  c.preprocess.standardize = all_fields.flag("preprocess.standardize", false);
  c.preprocess.pca = all_fields.count("preprocess.pca", 0);

  if (tree.find("ranking") != tree.not_found()) {
    const auto& r = section("ranking");
    RankingSpec spec;
    spec.method = detail::text_value(r, "method", "");
    spec.params = detail::params_of(r, {"method", "keep"});
    if (const auto k = r.get_optional<std::string>("keep")) c.keep = Params(std::map<std::string, std::string>{{"keep", *k}}).count("keep", 0);
    c.ranking = std::move(spec);
  }

  c.report_path = resolve(all_fields.text("output.report", ""));
  c.records_path = resolve(all_fields.text("output.records", ""));
  c.data_output_path = resolve(all_fields.text("output.data", ""));
  c.validate();
  return c;
}

inline WorkflowConfig parse_workflow_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_workflow_config(in);
}

inline WorkflowConfig load_workflow_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open config '" + path + "'");
  return parse_workflow_config(in, std::filesystem::path(path).parent_path());
}

// ---- pipeline ----

namespace detail {

/// Per-fold preprocessing, fit on training rows only: standardize, keep the
/// top-ranked features, project on principal components.
struct FoldPipeline {
  std::optional<std::pair<Vector, Vector>> scaling;  // mean, scale
  std::optional<std::vector<Index>> selected;        // sorted column indices
  std::optional<PcaModel> pca;
  Index pca_k = 0;

  SampleMatrix apply(const SampleMatrix& X) const {
    RowMatrix v = X.values();
    if (scaling) {
      v.rowwise() -= scaling->first.transpose();
      v.array().rowwise() /= scaling->second.transpose().array();
    }
    SampleMatrix out{RowMatrix(v)};
    if (selected) out = out.select_cols(*selected);
    if (pca) out = pca_transform(*pca, out, pca_k);
    return out;
  }
};

inline std::pair<Vector, Vector> fit_scaling(const SampleMatrix& X) {
  const Vector mean = X.values().colwise().mean().transpose();
  Vector scale = ((X.values().rowwise() - mean.transpose()).array().square().colwise().sum() /
                  double(std::max<Index>(X.rows() - 1, 1)))
                     .sqrt()
                     .transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale[j] > 0.0)) scale[j] = 1.0;  // constant column: centre only
  return {mean, scale};
}

struct FoldOutcome {
  Vector predictions;
  std::vector<Index> ranking;
};

inline FoldOutcome run_fold(const WorkflowConfig& c, const LabeledDataset& d, Index replicate, Index fold,
                            const std::vector<Index>& train, const std::vector<Index>& test,
                            const WorkflowHooks& hooks, bool predict) {
  FoldOutcome out;
  FoldPipeline pipe;
  LabeledDataset tr = d.subset(train);
  if (c.preprocess.standardize) {
    pipe.scaling = fit_scaling(tr.x);
    tr = LabeledDataset(pipe.apply(tr.x), tr.y);
  }
  if (c.ranking) {
    if (hooks.before_selection) hooks.before_selection(FitEvent{replicate, fold, train, test, tr});
    const FeatureRanking r = rank_features(*c.ranking, tr);
    out.ranking = r.order;
    if (c.keep > 0) {
      if (c.keep > r.order.size())
        throw InvalidParameter("keep=" + std::to_string(c.keep) + " exceeds " + std::to_string(r.order.size()) +
                               " features");
      std::vector<Index> sel(r.order.begin(), r.order.begin() + std::ptrdiff_t(c.keep));
      std::sort(sel.begin(), sel.end());
      pipe.selected = sel;
      tr = tr.with_features(sel);
    }
  }
  if (!predict) return out;
  if (c.preprocess.pca > 0) {
    pipe.pca = pca_learn(tr.x);
    pipe.pca_k = c.preprocess.pca;
    tr = LabeledDataset(pca_transform(*pipe.pca, tr.x, pipe.pca_k), tr.y);
  }
  if (hooks.before_fit) hooks.before_fit(FitEvent{replicate, fold, train, test, tr});
  const FittedModel model = fit_estimator(c.estimator, tr);
  out.predictions = predict_model(model, pipe.apply(d.x.select_rows(test)));
  return out;
}

struct ReplicatePlan {
  std::vector<std::pair<std::vector<Index>, std::vector<Index>>> folds;  // (train, test)
};

inline std::vector<ReplicatePlan> plan_replicates(const WorkflowConfig& c, const LabeledDataset& d, bool classify) {
  const Index n = d.size();
  const std::uint64_t seed = *c.seed;
  std::vector<ReplicatePlan> plans;
  std::vector<Index> all(n);
  std::iota(all.begin(), all.end(), 0);
  switch (c.resampling.scheme) {
    case ResamplingScheme::Resubstitution:
      plans.push_back({{{all, all}}});
      break;
    case ResamplingScheme::KFold: {
      const Rng root(seed);
      std::vector<Label> labels;
      if (classify && c.resampling.stratified) labels = d.labels();
      for (Index r = 0; r < c.resampling.repeats; ++r) {
        const std::uint64_t s = root.split(r).at(0);
        const FoldPlan plan = labels.empty() ? kfold(n, c.resampling.folds, s)
                                             : kfold(n, c.resampling.folds, s, std::span<const Label>(labels));
        ReplicatePlan rp;
        for (Index f = 0; f < plan.k; ++f) rp.folds.emplace_back(plan.train_indices(f), plan.test_indices(f));
        plans.push_back(std::move(rp));
      }
      break;
    }
    case ResamplingScheme::MonteCarlo:
      for (auto& s : monte_carlo_split(n, c.resampling.train_fraction, c.resampling.replicates, seed))
        plans.push_back({{{std::move(s.train), std::move(s.test)}}});
      break;
  }
  return plans;
}

inline ReplicateRecord run_replicate(const WorkflowConfig& c, const LabeledDataset& d, Index index,
                                     const ReplicatePlan& plan, const WorkflowHooks& hooks,
                                     const std::vector<Label>& classes) {
  ReplicateRecord rec;
  rec.index = index;
  const bool classify = c.task == WorkflowTask::Classify;
  const bool predict = classify || c.task == WorkflowTask::Regress;
  try {
    std::vector<double> yt_all, yp_all;
    for (Index f = 0; f < plan.folds.size(); ++f) {
      const auto& [train, test] = plan.folds[f];
      try {
        auto outcome = run_fold(c, d, index, f, train, test, hooks, predict);
        if (c.ranking) rec.rankings.push_back(std::move(outcome.ranking));
        for (Index i = 0; i < test.size() && predict; ++i) {
          yt_all.push_back(d.y[Eigen::Index(test[i])]);
          yp_all.push_back(outcome.predictions[Eigen::Index(i)]);
        }
      } catch (const Error& e) {
        rethrow_with_context(e, "fold " + std::to_string(f));
      }
    }
    if (predict) {
      rec.evaluated = yt_all.size();
      if (classify) {
        std::vector<Label> truth, pred;
        for (Index i = 0; i < yt_all.size(); ++i) {
          truth.push_back(Label(yt_all[i]));
          pred.push_back(Label(yp_all[i]));
        }
        std::vector<Label> table = classes;
        for (Label l : pred)
          if (!std::binary_search(classes.begin(), classes.end(), l)) table.push_back(l);
        std::sort(table.begin(), table.end());
        table.erase(std::unique(table.begin(), table.end()), table.end());
        rec.confusion = confusion(truth, pred, table);
        rec.error = error_rate(truth, pred);
      } else {
        rec.error = mean_squared_error(Eigen::Map<const Vector>(yt_all.data(), Eigen::Index(yt_all.size())),
                                       Eigen::Map<const Vector>(yp_all.data(), Eigen::Index(yp_all.size())));
      }
    }
  } catch (const Error& e) {
    rec.ok = false;
    rec.error_kind = std::string(to_string(e.kind()));
    rec.message = e.what();
    rec.rankings.clear();
    rec.confusion.reset();
  }
  if (hooks.replicate_done) hooks.replicate_done(index, rec.ok);
  return rec;
}

inline void summarize(WorkflowReport& rep) {
  std::vector<double> errs;
  for (const auto& r : rep.replicates)
    if (r.ok) errs.push_back(r.error);
  if (errs.empty()) return;
  double mean = 0.0;
  for (double e : errs) mean += e;
  mean /= double(errs.size());
  double ss = 0.0;
  for (double e : errs) ss += (e - mean) * (e - mean);
  rep.mean_error = mean;
  rep.stdev_error = errs.size() > 1 ? std::sqrt(ss / double(errs.size() - 1)) : 0.0;
}

inline void run_resampled(const WorkflowConfig& c, const LabeledDataset& d, const WorkflowHooks& hooks,
                          WorkflowReport& rep) {
  const bool labelled = c.task != WorkflowTask::Regress;
  std::vector<Label> classes;
  if (labelled) classes = LabelEncoder(d.labels()).classes();
  const auto plans = plan_replicates(c, d, labelled);
  rep.replicates.resize(plans.size());
  const Index workers = std::min<Index>(c.threads, plans.size());
  if (workers <= 1) {
    for (Index r = 0; r < plans.size(); ++r) rep.replicates[r] = run_replicate(c, d, r, plans[r], hooks, classes);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (Index r; (r = next.fetch_add(1)) < plans.size();)
          rep.replicates[r] = run_replicate(c, d, r, plans[r], hooks, classes);
      });
    for (auto& t : pool) t.join();
  }

  if (c.task == WorkflowTask::Classify || c.task == WorkflowTask::Regress) summarize(rep);
  if (c.task == WorkflowTask::Classify) {
    std::map<Label, Index> freq;
    for (Label l : d.labels()) ++freq[l];
    Index top = 0;
    for (const auto& [l, f] : freq) top = std::max(top, f);
    rep.baseline_error = 1.0 - double(top) / double(d.size());
    for (const auto& r : rep.replicates) {
      if (!r.confusion) continue;
      if (!rep.confusion) {
        rep.confusion = *r.confusion;
        continue;
      }
      // widen both tables to the union of classes before adding
      std::vector<Label> table = rep.confusion->classes;
      table.insert(table.end(), r.confusion->classes.begin(), r.confusion->classes.end());
      std::sort(table.begin(), table.end());
      table.erase(std::unique(table.begin(), table.end()), table.end());
      auto widen = [&](const ConfusionMatrix& m) {
        ConfusionMatrix w;
        w.classes = table;
        w.counts = decltype(w.counts)::Zero(Eigen::Index(table.size()), Eigen::Index(table.size()));
        for (Index a = 0; a < m.classes.size(); ++a)
          for (Index b = 0; b < m.classes.size(); ++b) {
            const auto ia = std::lower_bound(table.begin(), table.end(), m.classes[a]) - table.begin();
            const auto ib = std::lower_bound(table.begin(), table.end(), m.classes[b]) - table.begin();
            w.counts(ia, ib) = m.counts(Eigen::Index(a), Eigen::Index(b));
          }
        return w;
      };
      ConfusionMatrix sum = widen(*rep.confusion);
      sum += widen(*r.confusion);
      rep.confusion = std::move(sum);
    }
  }
  if (c.ranking) {
    RankedListSet set;
    set.universe = d.features();
    for (const auto& r : rep.replicates)
      for (const auto& l : r.rankings) set.lists.push_back(l);
    if (set.lists.size() >= 2) {
      const Index k = c.keep > 0 ? std::min(c.keep, d.features()) : d.features();
      rep.stability = canberra_stability(set, k);
    }
  }
}

inline void run_reduce(const WorkflowConfig& c, const LabeledDataset& d, WorkflowReport& rep) {
  const Params p(c.estimator.params.values());
  ReplicateRecord rec;
  try {
    SampleMatrix X = d.x;
    if (c.preprocess.standardize) {
      FoldPipeline pipe;
      pipe.scaling = fit_scaling(X);
      X = pipe.apply(X);
    }
    Vector eig;
    if (c.estimator.name == "pca") {
      const PcaModel m = pca_learn(X);
      eig = m.eigenvalues;
      const Index k = p.count("components", std::min<Index>(2, m.num_components()));
      if (c.task == WorkflowTask::Transform) rep.output_data = pca_transform(m, X, k).values();
    } else {
      const KpcaModel m = kpca_learn(X, kernel_from_params(p, "gaussian"));
      eig = m.eigenvalues;
      const Index k = p.count("components", std::min<Index>(2, m.num_components()));
      if (c.task == WorkflowTask::Transform) rep.output_data = RowMatrix(kpca_transform(m, X, k));
    }
    p.check_consumed("estimator " + c.estimator.name);
    const double total = eig.sum();
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      rep.metrics.emplace_back("eigenvalue." + std::to_string(i), eig[i]);
      rep.metrics.emplace_back("explained." + std::to_string(i), total > 0 ? eig[i] / total : 0.0);
    }
  } catch (const Error& e) {
    rec.ok = false;
    rec.error_kind = std::string(to_string(e.kind()));
    rec.message = e.what();
  }
  rep.replicates.push_back(std::move(rec));
}

inline void run_cluster(const WorkflowConfig& c, const LabeledDataset& d, WorkflowReport& rep) {
  const Params p(c.estimator.params.values());
  ReplicateRecord rec;
  try {
    const Index k = p.count("k", 2);
    if (c.estimator.name == "kmeans") {
      KmeansOptions o;
      o.max_iter = p.count("max_iter", o.max_iter);
      o.tol = p.real("tol", o.tol);
      p.check_consumed("estimator kmeans");
      const auto r = kmeans(d.x, k, *c.seed, o);
      rep.assignments = r.assignments;
      rep.metrics.emplace_back("inertia", r.inertia);
      rep.metrics.emplace_back("iterations", double(r.iterations));
      rep.metrics.emplace_back("converged", r.converged ? 1.0 : 0.0);
    } else {
      const Linkage method = linkage_from_string(p.text("linkage", "average"));
      p.check_consumed("estimator hierarchical");
      const auto dendro = linkage(d.x, method);
      rep.assignments = cut(dendro, k);
      for (Index i = 0; i < dendro.merges.size(); ++i)
        rep.metrics.emplace_back("merge_height." + std::to_string(i), dendro.merges[i].height);
    }
    std::vector<Index> sizes(k, 0);
    for (Index a : rep.assignments) ++sizes[a];
    for (Index j = 0; j < k; ++j) rep.metrics.emplace_back("cluster_size." + std::to_string(j), double(sizes[j]));
  } catch (const Error& e) {
    rec.ok = false;
    rec.error_kind = std::string(to_string(e.kind()));
    rec.message = e.what();
  }
  rep.replicates.push_back(std::move(rec));
}

}  // namespace detail

/// Deterministic under (config, seed): replicate r only depends on its own
/// split, and results are aggregated in replicate order whatever the thread
/// count. Feature ranking and preprocessing are refit on each training fold.
/// A failing replicate is recorded in the report rather than thrown.
inline WorkflowReport run_workflow(const WorkflowConfig& c, const LabeledDataset& d, const WorkflowHooks& hooks = {}) {
  c.validate();
  WorkflowReport rep;
  rep.task = c.task;
  rep.estimator = c.ranking && (c.task == WorkflowTask::Rank || c.task == WorkflowTask::Stability)
                      ? c.ranking->method
                      : c.estimator.name;
  rep.seed = *c.seed;
  rep.samples = d.size();
  rep.features = d.features();
  rep.resampling = std::string(to_string(c.resampling.scheme));
  switch (c.task) {
    case WorkflowTask::Reduce:
    case WorkflowTask::Transform:
      rep.resampling = "none";
      detail::run_reduce(c, d, rep);
      break;
    case WorkflowTask::Cluster:
      rep.resampling = "none";
      detail::run_cluster(c, d, rep);
      break;
    default:
      detail::run_resampled(c, d, hooks, rep);
  }
  return rep;
}

/// Loads the configured CSV. Unlabelled data (label_column = none) gets zero
/// targets, which only the reduce, transform and cluster tasks accept.
inline LabeledDataset load_workflow_data(const WorkflowConfig& c) {
  if (c.data_path.empty()) throw InvalidParameter("config has no [data] path");
  if (c.csv.label_column) return parse_csv(c.data_path, c.csv);
  if (c.task != WorkflowTask::Reduce && c.task != WorkflowTask::Transform && c.task != WorkflowTask::Cluster)
    throw InvalidParameter(std::string(to_string(c.task)) + " needs a label column");
  SampleMatrix X = parse_csv_samples(c.data_path, c.csv);
  Vector y = Vector::Zero(Eigen::Index(X.rows()));
  return LabeledDataset(std::move(X), std::move(y));
}

inline WorkflowReport run_workflow(const WorkflowConfig& c, const WorkflowHooks& hooks = {}) {
  return run_workflow(c, load_workflow_data(c), hooks);
}

// ---- rendering ----

inline std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string join_indices(const std::vector<Index>& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

/// key=value lines, floats with 17 significant digits.
inline std::string render_records(const WorkflowReport& r) {
  std::ostringstream o;
  auto num = [](double v) { return format_number(v, 17); };
  o << "task=" << to_string(r.task) << '\n';
  o << "estimator=" << r.estimator << '\n';
  o << "seed=" << r.seed << '\n';
  o << "samples=" << r.samples << '\n';
  o << "features=" << r.features << '\n';
  o << "resampling=" << r.resampling << '\n';
  o << "replicates=" << r.replicates.size() << '\n';
  o << "failures=" << r.failures() << '\n';
  for (const auto& rec : r.replicates) {
    const std::string p = "replicate." + std::to_string(rec.index) + ".";
    o << p << "status=" << (rec.ok ? "ok" : "failed") << '\n';
    if (!rec.ok) {
      o << p << "error_kind=" << rec.error_kind << '\n';
      o << p << "message=" << rec.message << '\n';
      continue;
    }
    if (rec.evaluated > 0) {
      o << p << "error=" << num(rec.error) << '\n';
      o << p << "evaluated=" << rec.evaluated << '\n';
    }
    for (Index f = 0; f < rec.rankings.size(); ++f)
      o << p << "ranking." << f << "=" << join_indices(rec.rankings[f]) << '\n';
  }
  if (r.mean_error) o << "mean_error=" << num(*r.mean_error) << '\n';
  if (r.stdev_error) o << "stdev_error=" << num(*r.stdev_error) << '\n';
  if (r.baseline_error) o << "baseline_error=" << num(*r.baseline_error) << '\n';
  if (r.confusion) {
    const auto& cm = *r.confusion;
    for (Index a = 0; a < cm.classes.size(); ++a)
      for (Index b = 0; b < cm.classes.size(); ++b)
        o << "confusion." << cm.classes[a] << "." << cm.classes[b] << "="
          << cm.counts(Eigen::Index(a), Eigen::Index(b)) << '\n';
  }
  if (r.stability) {
    o << "stability.indicator=" << num(r.stability->indicator) << '\n';
    o << "stability.mean_distance=" << num(r.stability->mean_distance) << '\n';
    o << "stability.expected=" << num(r.stability->expected) << '\n';
    o << "stability.top_k=" << r.stability->top_k << '\n';
    o << "stability.pairs=" << r.stability->pairs << '\n';
  }
  for (const auto& [k, v] : r.metrics) o << k << "=" << num(v) << '\n';
  if (!r.assignments.empty()) o << "assignments=" << join_indices(r.assignments) << '\n';
  return o.str();
}

/// Human summary, floats with 4 significant digits.
inline std::string render_text(const WorkflowReport& r) {
  std::ostringstream o;
  auto num = [](double v) { return format_number(v, 4); };
  o << "task " << to_string(r.task) << ", estimator " << r.estimator << ", seed " << r.seed << '\n';
  o << "data " << r.samples << " samples x " << r.features << " features, resampling " << r.resampling << '\n';
  const bool has_error = std::any_of(r.replicates.begin(), r.replicates.end(),
                                     [](const ReplicateRecord& x) { return x.ok && x.evaluated > 0; });
  for (const auto& rec : r.replicates) {
    if (!rec.ok) o << "replicate " << rec.index << ": FAILED " << rec.message << '\n';
    else if (has_error) o << "replicate " << rec.index << ": error " << num(rec.error) << '\n';
  }
  if (r.mean_error)
    o << "mean error " << num(*r.mean_error) << " (stdev " << num(r.stdev_error.value_or(0.0)) << ") over "
      << (r.replicates.size() - r.failures()) << " replicates\n";
  if (r.baseline_error) o << "majority-class baseline " << num(*r.baseline_error) << '\n';
  if (r.confusion) {
    const auto& cm = *r.confusion;
    o << "confusion totals (rows true, columns predicted)\n";
    o << "      ";
    for (Label l : cm.classes) o << ' ' << std::setw(6) << l;
    o << '\n';
    for (Index a = 0; a < cm.classes.size(); ++a) {
      o << std::setw(6) << cm.classes[a];
      for (Index b = 0; b < cm.classes.size(); ++b) o << ' ' << std::setw(6) << cm.counts(Eigen::Index(a), Eigen::Index(b));
      o << '\n';
    }
  }
  if (r.stability)
    o << "canberra stability " << num(r.stability->indicator) << " (top " << r.stability->top_k << ", "
      << r.stability->pairs << " pairs; 0 = identical lists, 1 = random)\n";
  for (const auto& [k, v] : r.metrics) o << k << ' ' << num(v) << '\n';
  if (r.failed()) o << r.failures() << " replicate(s) failed\n";
  return o.str();
}

}  // namespace mlcore
