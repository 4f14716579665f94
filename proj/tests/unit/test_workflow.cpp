#include <mutex>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mlcore/workflow.hpp"
#include "testing.hpp"

using namespace mlcore;

namespace {

Params P(std::map<std::string, std::string> values) { return Params(std::move(values)); }

LabeledDataset noise(std::uint64_t seed, Index n, Index p) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(gen);
  std::vector<Label> y(n);
  for (Index i = 0; i < n; ++i) y[i] = Label(i % 2);
  std::shuffle(y.begin(), y.end(), gen);
  return LabeledDataset(SampleMatrix(X), y);
}

WorkflowConfig classify(std::string estimator, Params params = {}) {
  WorkflowConfig c;
  c.task = WorkflowTask::Classify;
  c.seed = 7;
  c.estimator = {std::move(estimator), std::move(params)};
  return c;
}

/// Leave-one-out 1-NN error by direct enumeration.
double loo_1nn(const LabeledDataset& d) {
  const auto y = d.labels();
  Index wrong = 0;
  for (Index i = 0; i < d.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Label guess = 0;
    for (Index j = 0; j < d.size(); ++j) {
      if (j == i) continue;
      const double dist = (d.x.row(i) - d.x.row(j)).squaredNorm();
      if (dist < best) best = dist, guess = y[j];
    }
    wrong += guess != y[i];
  }
  return double(wrong) / double(d.size());
}

}  // namespace

TEST(Workflow, LeaveOneOutKnnMatchesDirectLoop) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const Index n = 40;
  RowMatrix X(static_cast<Eigen::Index>(n), 3);
  std::vector<Label> y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = Label(i % 3);
    for (Eigen::Index j = 0; j < 3; ++j) X(Eigen::Index(i), j) = g(gen) + (j == 0 ? 1.5 * double(y[i]) : 0.0);
  }
  const LabeledDataset d(SampleMatrix(X), y);
  auto c = classify("knn", P({{"k", "1"}}));
  c.resampling.folds = n;
  const auto rep = run_workflow(c, d);
  ASSERT_EQ(rep.replicates.size(), 1u);
  ASSERT_TRUE(rep.replicates[0].ok);
  const double oracle = loo_1nn(d);
  EXPECT_GT(oracle, 0.0);
  EXPECT_DOUBLE_EQ(*rep.mean_error, oracle);
  EXPECT_EQ(rep.replicates[0].evaluated, n);
  EXPECT_EQ(rep.confusion->total(), std::int64_t(n));
  EXPECT_EQ(*rep.stdev_error, 0.0);
}

TEST(Workflow, ShuffledLabelsGiveBaselineErrorWhenSelectionIsInFold) {
  const auto d = noise(11, 60, 200);
  auto c = classify("svm", P({{"kernel", "linear"}}));
  c.ranking = RankingSpec{"golub", {}};
  c.keep = 5;
  c.resampling.folds = 5;
  c.resampling.repeats = 5;
  const auto rep = run_workflow(c, d);
  ASSERT_FALSE(rep.failed());
  EXPECT_DOUBLE_EQ(*rep.baseline_error, 0.5);
  EXPECT_NEAR(*rep.mean_error, *rep.baseline_error, 0.1);

  // The leaky protocol (rank once on all rows, then cross-validate) looks far
  // better than chance on the same data, so the check above has teeth.
  const auto order = rank_features({"golub", {}}, d).order;
  std::vector<Index> top(order.begin(), order.begin() + 5);
  std::sort(top.begin(), top.end());
  auto leaky = c;
  leaky.ranking.reset();
  leaky.keep = 0;
  const auto leaky_rep = run_workflow(leaky, d.with_features(top));
  EXPECT_LT(*leaky_rep.mean_error, *rep.mean_error - 0.1);
}

TEST(Workflow, SelectionNeverSeesTestRows) {
  const auto d = noise(12, 30, 12);
  auto c = classify("knn", P({{"k", "3"}}));
  c.ranking = RankingSpec{"irelief", {}};
  c.keep = 4;
  c.preprocess.standardize = true;
  c.resampling.folds = 3;
  c.resampling.repeats = 2;
  Index selections = 0, fits = 0;
  WorkflowHooks hooks;
  auto check = [&](const FitEvent& e) {
    const std::set<Index> train(e.train_rows.begin(), e.train_rows.end());
    for (Index t : e.test_rows) EXPECT_EQ(train.count(t), 0u);
    EXPECT_EQ(train.size() + e.test_rows.size(), d.size());
    ASSERT_EQ(e.data.size(), e.train_rows.size());
    // labels handed to the fitting step are exactly the training labels
    for (Index i = 0; i < e.train_rows.size(); ++i) EXPECT_EQ(e.data.y[Eigen::Index(i)], d.y[Eigen::Index(e.train_rows[i])]);
  };
  hooks.before_selection = [&](const FitEvent& e) {
    ++selections;
    check(e);
    EXPECT_EQ(e.data.features(), d.features());
  };
  hooks.before_fit = [&](const FitEvent& e) {
    ++fits;
    check(e);
    EXPECT_EQ(e.data.features(), 4u);
  };
  const auto rep = run_workflow(c, d, hooks);
  EXPECT_FALSE(rep.failed());
  EXPECT_EQ(selections, 6u);
  EXPECT_EQ(fits, 6u);
  ASSERT_TRUE(rep.stability.has_value());
  EXPECT_EQ(rep.stability->top_k, 4u);
  EXPECT_EQ(rep.replicates[1].rankings.size(), 3u);
}

#ifdef MLCORE_DATA_DIR
TEST(Workflow, IrisPcaThenLinearSvm) {
  auto c = classify("svm", P({{"kernel", "linear"}, {"C", "1"}}));
  c.preprocess.pca = 2;
  c.resampling.scheme = ResamplingScheme::Resubstitution;
  const auto rep = run_workflow(c, mlcore::testing::load_iris());
  ASSERT_FALSE(rep.failed());
  EXPECT_NEAR(*rep.mean_error, 0.033, 0.0005);
  EXPECT_DOUBLE_EQ(*rep.mean_error, 5.0 / 150.0);
}

TEST(Workflow, ConfigFileDrivesTheSameRun) {
  const std::string ini = std::string("[workflow]\ntask = classify\nseed = 1\n[data]\npath = ") + MLCORE_DATA_DIR +
                          "/iris.csv\nheader = true\n[estimator]\nname = svm\nkernel = linear\nC = 1\n"
                          "[preprocess]\npca = 2\n[resampling]\nscheme = resubstitution\n";
  const auto rep = run_workflow(parse_workflow_config_text(ini));
  EXPECT_DOUBLE_EQ(*rep.mean_error, 5.0 / 150.0);
}
#endif

TEST(Workflow, ReportsAreByteIdenticalAcrossRunsAndThreadCounts) {
  const auto d = noise(13, 50, 8);
  auto c = classify("lda");
  c.ranking = RankingSpec{"rfe", P({{"estimator", "ridge"}})};
  c.keep = 3;
  c.resampling.scheme = ResamplingScheme::MonteCarlo;
  c.resampling.replicates = 12;
  const auto a = run_workflow(c, d), b = run_workflow(c, d);
  EXPECT_EQ(render_records(a), render_records(b));
  EXPECT_EQ(render_text(a), render_text(b));
  c.threads = 4;
  std::mutex mu;
  std::vector<Index> done;
  WorkflowHooks hooks;
  hooks.replicate_done = [&](Index r, bool) {
    std::lock_guard lock(mu);
    done.push_back(r);
  };
  const auto t = run_workflow(c, d, hooks);
  EXPECT_EQ(render_records(t), render_records(a));
  EXPECT_EQ(done.size(), 12u);
  c.seed = 8;
  EXPECT_NE(render_records(run_workflow(c, d)), render_records(a));
}

TEST(Workflow, RecordsUseSeventeenDigitsAndTextFour) {
  const auto d = noise(14, 30, 3);
  auto c = classify("knn");
  c.resampling.folds = 3;
  const auto rep = run_workflow(c, d);
  const auto records = render_records(rep);
  const auto text = render_text(rep);
  EXPECT_NE(records.find("mean_error=" + format_number(*rep.mean_error, 17) + "\n"), std::string::npos);
  EXPECT_NE(text.find("mean error " + format_number(*rep.mean_error, 4)), std::string::npos);
  // 17 digits round-trip exactly
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0, 17)), 1.0 / 3.0);
  EXPECT_EQ(format_number(1.0 / 3.0, 4), "0.3333");
  for (const char* key : {"task=classify\n", "replicate.0.status=ok\n", "confusion.0.0=", "baseline_error="})
    EXPECT_NE(records.find(key), std::string::npos) << key;
}

TEST(Workflow, FailingReplicateIsRecorded) {
  // Splits whose training half misses the lone positive sample cannot fit.
  const LabeledDataset d(SampleMatrix{{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}}, std::vector<Label>{0, 0, 0, 0, 0, 0, 0, 1});
  auto c = classify("lda");
  c.resampling.scheme = ResamplingScheme::MonteCarlo;
  c.resampling.replicates = 10;
  c.resampling.train_fraction = 0.5;
  const auto rep = run_workflow(c, d);
  EXPECT_TRUE(rep.failed());
  EXPECT_GT(rep.failures(), 0u);
  EXPECT_LT(rep.failures(), 10u);
  for (const auto& r : rep.replicates)
    if (!r.ok) {
      EXPECT_EQ(r.error_kind, "InvalidLabels");
      EXPECT_NE(render_records(rep).find("replicate." + std::to_string(r.index) + ".status=failed"), std::string::npos);
    }
  ASSERT_TRUE(rep.mean_error.has_value());
  EXPECT_NE(render_text(rep).find("failed"), std::string::npos);
}

TEST(Workflow, RegressionUsesMeanSquaredError) {
  std::mt19937_64 gen(15);
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix X(30, 2);
  Vector y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    X(i, 0) = g(gen), X(i, 1) = g(gen);
    y[i] = 2 * X(i, 0) - X(i, 1) + 0.5;
  }
  WorkflowConfig c;
  c.task = WorkflowTask::Regress;
  c.seed = 1;
  c.estimator = {"ols", {}};
  const auto rep = run_workflow(c, LabeledDataset(SampleMatrix(X), y));
  EXPECT_LT(*rep.mean_error, 1e-20);
  EXPECT_FALSE(rep.confusion.has_value());
}

TEST(Workflow, RankTaskReportsStability) {
  const auto d = noise(16, 40, 10);
  WorkflowConfig c;
  c.task = WorkflowTask::Rank;
  c.seed = 2;
  c.ranking = RankingSpec{"golub", {}};
  c.resampling.folds = 4;
  const auto rep = run_workflow(c, d);
  ASSERT_TRUE(rep.stability.has_value());
  EXPECT_EQ(rep.stability->pairs, 6u);
  EXPECT_FALSE(rep.mean_error.has_value());
  EXPECT_EQ(rep.estimator, "golub");
}

TEST(Workflow, ClusterAndReduceTasks) {
  const LabeledDataset d(SampleMatrix{{0, 0}, {0, 1}, {10, 10}, {10, 11}, {20, 0}}, Vector::Zero(5));
  WorkflowConfig c;
  c.seed = 3;
  c.task = WorkflowTask::Cluster;
  c.estimator = {"hierarchical", P({{"k", "3"}, {"linkage", "single"}})};
  auto rep = run_workflow(c, d);
  EXPECT_EQ(rep.assignments, (std::vector<Index>{0, 0, 1, 1, 2}));
  c.estimator = {"kmeans", P({{"k", "3"}})};
  rep = run_workflow(c, d);
  EXPECT_FALSE(rep.failed());
  EXPECT_EQ(rep.assignments.size(), 5u);
  c.task = WorkflowTask::Transform;
  c.estimator = {"pca", P({{"components", "1"}})};
  rep = run_workflow(c, d);
  ASSERT_TRUE(rep.output_data.has_value());
  EXPECT_EQ(rep.output_data->cols(), 1);
  EXPECT_EQ(rep.metrics[0].first, "eigenvalue.0");
  c.estimator = {"pca", P({{"componentz", "1"}})};
  EXPECT_TRUE(run_workflow(c, d).failed());
}

TEST(Config, ParsesSectionsAndRejectsMistakes) {
  const std::string ok =
      "[workflow]\ntask = classify\nseed = 42\nthreads = 2\n"
      "[data]\npath = x.csv\nheader = true\ndelimiter = tab\nlabel_column = 0\n"
      "[estimator]\nname = svm\nkernel = gaussian\ngamma = 0.5\n"
      "[resampling]\nscheme = montecarlo\nreplicates = 20\ntrain_fraction = 0.8\n"
      "[preprocess]\nstandardize = true\n"
      "[ranking]\nmethod = rfe\nkeep = 10\nestimator = svm\n"
      "[output]\nreport = out.txt\nrecords = out.kv\n";
  std::istringstream in(ok);
  const auto c = parse_workflow_config(in, "/base");
  EXPECT_EQ(*c.seed, 42u);
  EXPECT_EQ(c.threads, 2u);
  EXPECT_EQ(c.data_path, "/base/x.csv");
  EXPECT_EQ(c.csv.delimiter, '\t');
  EXPECT_EQ(*c.csv.label_column, 0);
  EXPECT_EQ(c.estimator.name, "svm");
  EXPECT_EQ(c.estimator.params.values().at("gamma"), "0.5");
  EXPECT_EQ(c.resampling.scheme, ResamplingScheme::MonteCarlo);
  EXPECT_EQ(c.resampling.replicates, 20u);
  EXPECT_TRUE(c.preprocess.standardize);
  EXPECT_EQ(c.ranking->method, "rfe");
  EXPECT_EQ(c.keep, 10u);
  EXPECT_EQ(c.ranking->params.values().count("keep"), 0u);
  EXPECT_EQ(c.records_path, "/base/out.kv");

  auto without = [&](const std::string& drop) {
    std::string s = ok;
    s.erase(s.find(drop), drop.size());
    return s;
  };
  EXPECT_THROW(parse_workflow_config_text(without("seed = 42\n")), InvalidParameter);
  EXPECT_THROW(parse_workflow_config_text(ok + "[extra]\na = 1\n"), InvalidParameter);
  EXPECT_THROW(parse_workflow_config_text(without("threads = 2\n") + "[workflow]\n"), ParseError);
  EXPECT_THROW(parse_workflow_config_text("[workflow]\nseed = 1\nspeed = 3\n[estimator]\nname = knn\n"), InvalidParameter);
  EXPECT_THROW(parse_workflow_config_text("[workflow]\nseed = 1\n[estimator]\nname = magic\n"), InvalidParameter);
  EXPECT_THROW(parse_workflow_config_text("[workflow]\nseed = 1\ntask = regress\n[estimator]\nname = knn\n"),
               InvalidParameter);
  EXPECT_THROW(parse_workflow_config_text("[workflow\nseed = 1\n"), ParseError);
}
