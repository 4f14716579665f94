#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mlcore/feature_selection.hpp"
#include "mlcore/svm.hpp"
#include "testing.hpp"

using namespace mlcore;
using mlcore::testing::random_matrix;

namespace {

LabeledDataset sign_plus_noise(std::uint64_t seed, Index n) {
  std::mt19937_64 gen(seed);
  RowMatrix X = random_matrix(gen, n, 2);
  std::vector<Label> y(n);
  for (Index i = 0; i < n; ++i) {
    double& x0 = X(Eigen::Index(i), 0);
    if (std::abs(x0) < 0.2) x0 += x0 < 0 ? -0.2 : 0.2;
    y[i] = x0 > 0 ? 1 : -1;
  }
  return {SampleMatrix(X), y};
}

std::vector<Index> random_permutation(std::mt19937_64& gen, Index p) {
  std::vector<Index> v(p);
  std::iota(v.begin(), v.end(), 0);
  std::shuffle(v.begin(), v.end(), gen);
  return v;
}

}  // namespace

TEST(Rfe, InformativeFeatureRanksFirst) {
  const auto d = sign_plus_noise(1, 60);
  const auto svm = [](const LabeledDataset& s) { return linear_svc_fit(s); };
  const auto w = svm(d).weights;
  EXPECT_GT(w[0] * w[0], w[1] * w[1]);
  EXPECT_EQ(rfe(svm, d).order, (std::vector<Index>{0, 1}));
}

TEST(Rfe, ConstantFeatureGoesFirst) {
  const auto base = sign_plus_noise(2, 40);
  RowMatrix X(40, 3);
  X.leftCols(2) = base.x.values();
  X.col(2).setConstant(3.0);
  const LabeledDataset d(SampleMatrix(X), base.y);
  const auto r = rfe([](const LabeledDataset& s) { return golub_fit(s); }, d);
  EXPECT_EQ(r.order.back(), 2u);
}

TEST(Rfe, GolubThreeRoundReplay) {
  std::mt19937_64 gen(3);
  RowMatrix X = random_matrix(gen, 20, 3);
  std::vector<Label> y(20);
  for (Index i = 0; i < 20; ++i) {
    y[i] = Label(i % 2);
    X(Eigen::Index(i), 0) += 0.3 * double(y[i]);
    X(Eigen::Index(i), 1) -= 1.0 * double(y[i]);
    X(Eigen::Index(i), 2) += 0.6 * double(y[i]);
  }
  const LabeledDataset d(SampleMatrix(X), y);
  // hand simulation: per-feature golub weights by loops, eliminating the smallest square each round
  auto weight = [&](Index j) {
    double s[2] = {0, 0}, ss[2] = {0, 0}, n[2] = {0, 0};
    for (Index i = 0; i < 20; ++i) {
      const double v = X(Eigen::Index(i), Eigen::Index(j));
      s[y[i]] += v;
      ss[y[i]] += v * v;
      n[y[i]] += 1;
    }
    const double m0 = s[0] / n[0], m1 = s[1] / n[1];
    const double sd0 = std::sqrt((ss[0] - n[0] * m0 * m0) / (n[0] - 1));
    const double sd1 = std::sqrt((ss[1] - n[1] * m1 * m1) / (n[1] - 1));
    return (m1 - m0) / (sd0 + sd1);
  };
  std::vector<Index> remaining{0, 1, 2}, eliminated;
  while (remaining.size() > 1) {
    auto it = std::min_element(remaining.begin(), remaining.end(),
                               [&](Index a, Index b) { return weight(a) * weight(a) < weight(b) * weight(b); });
    eliminated.push_back(*it);
    remaining.erase(it);
  }
  eliminated.push_back(remaining[0]);
  std::reverse(eliminated.begin(), eliminated.end());
  EXPECT_EQ(rfe([](const LabeledDataset& s) { return golub_fit(s); }, d).order, eliminated);
  EXPECT_EQ(eliminated, (std::vector<Index>{1, 2, 0}));
}

TEST(Rfe, FullStepEqualsSingleFitSort) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Index p = 2 + Index(trial % 5);
    const RowMatrix X = random_matrix(gen, 30, p);
    const Vector y = random_matrix(gen, 30, 1).col(0);
    const LabeledDataset d(SampleMatrix(X), y);
    const auto trainer = [](const LabeledDataset& s) { return ridge_fit(s, 0.5); };
    const Vector w = trainer(d).weights;
    std::vector<Index> expected(p);
    std::iota(expected.begin(), expected.end(), 0);
    std::stable_sort(expected.begin(), expected.end(), [&](Index a, Index b) {
      return w[Eigen::Index(a)] * w[Eigen::Index(a)] > w[Eigen::Index(b)] * w[Eigen::Index(b)];
    });
    EXPECT_EQ(rfe(trainer, d, p - 1).order, expected);
    const auto step1 = rfe(trainer, d, 1);
    step1.validate();
  }
}

TEST(Rfe, TieDropsHigherIndexFirst) {
  const LabeledDataset d(SampleMatrix{{1, 1, 1}, {2, 2, 2}}, Vector((Vector(2) << 0.0, 1.0).finished()));
  const auto flat = [](const LabeledDataset& s) {
    LinearModel m;
    m.weights = Vector::Ones(Eigen::Index(s.x.cols()));
    return m;
  };
  EXPECT_EQ(rfe(flat, d).order, (std::vector<Index>{0, 1, 2}));
}

TEST(Rfe, TrainerFailureCarriesSubset) {
  const auto d = sign_plus_noise(5, 10);
  const auto bad = [](const LabeledDataset& s) -> LinearModel {
    throw InvalidParameter("boom with " + std::to_string(s.x.cols()));
  };
  try {
    rfe(bad, d);
    FAIL();
  } catch (const InvalidParameter& e) {
    EXPECT_NE(std::string(e.what()).find("rfe round 0 on features {0,1}"), std::string::npos) << e.what();
  }
}

TEST(KfdaRfe, ConstantFeatureDroppedFirst) {
  const auto base = sign_plus_noise(6, 30);
  RowMatrix X(30, 2);
  X.col(0) = base.x.values().col(0);
  X.col(1).setConstant(2.0);
  const LabeledDataset d(SampleMatrix(X), base.y);
  const auto r = kfda_rfe(KernelSpec::linear(), d, 1e-3);
  EXPECT_EQ(r.order, (std::vector<Index>{0, 1}));
  EXPECT_NEAR((*r.scores)[1], 0.0, 1e-9);
}

TEST(KfdaRfe, LinearKernelAgreesWithFdaWeights) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    // class-conditional spread is spherical, so Fisher weights and quotient impact order agree
    RowMatrix X(40, 2);
    std::vector<Label> y(40);
    const double shift0 = 0.5 + double(gen() % 100) / 50.0, shift1 = 0.5 + double(gen() % 100) / 50.0;
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index i = 0; i < 40; ++i) {
      y[i] = Label(i % 2);
      X(Eigen::Index(i), 0) = g(gen) + shift0 * double(y[i]);
      X(Eigen::Index(i), 1) = g(gen) + shift1 * double(y[i]);
    }
    const LabeledDataset d(SampleMatrix(X), y);
    const auto fda = [](const LabeledDataset& s) {
      LinearModel m;
      m.weights = fda_fit(s, 1e-9).direction;
      return m;
    };
    EXPECT_EQ(kfda_rfe(KernelSpec::linear(), d, 1e-9).order, rfe(fda, d).order) << "trial " << trial;
  }
}

TEST(KfdaRfe, SingleFeature) {
  const LabeledDataset d(SampleMatrix{{0}, {1}, {2}, {3}}, std::vector<Label>{0, 0, 1, 1});
  int calls = 0;
  const auto r = kfda_rfe(
      [&](const SampleMatrix& X) {
        ++calls;
        return gram(KernelSpec::linear(), X);
      },
      d);
  EXPECT_EQ(r.order, (std::vector<Index>{0}));
  EXPECT_EQ(calls, 0);
}

TEST(IRelief, ExchangeableFeaturesGetEqualWeights) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix X(40, 2);
  std::vector<Label> y(40);
  for (Index i = 0; i < 20; ++i) {
    const double a = g(gen) + (i % 2 ? 1.0 : 0.0), b = g(gen) + (i % 2 ? 1.0 : 0.0);
    X.row(Eigen::Index(2 * i)) << a, b;
    X.row(Eigen::Index(2 * i + 1)) << b, a;
    y[2 * i] = y[2 * i + 1] = Label(i % 2);
  }
  const auto r = irelief(LabeledDataset(SampleMatrix(X), y));
  EXPECT_NEAR(r.weights[0], r.weights[1], 1e-3);
}

TEST(IRelief, InformativeBeatsNoise) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix X(60, 2);
  std::vector<Label> y(60);
  for (Index i = 0; i < 60; ++i) {
    y[i] = Label(i % 2);
    X(Eigen::Index(i), 0) = (y[i] ? 3.0 : -3.0) + 0.3 * g(gen);
    X(Eigen::Index(i), 1) = g(gen);
  }
  IReliefOptions o;
  o.sigma = 2.0;
  const auto r = irelief(LabeledDataset(SampleMatrix(X), y), o);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.weights[0], 5.0 * r.weights[1]);
  EXPECT_GE(r.weights.minCoeff(), 0.0);
  EXPECT_NEAR(r.weights.norm(), 1.0, 1e-12);
}

TEST(IRelief, SingleFeatureUnitWeight) {
  const auto r = irelief(LabeledDataset(SampleMatrix{{0}, {0.1}, {2}, {2.2}}, std::vector<Label>{0, 0, 1, 1}));
  EXPECT_EQ(r.weights[0], 1.0);
}

TEST(IRelief, FlagsNonConvergence) {
  const auto d = sign_plus_noise(10, 30);
  IReliefOptions o;
  o.max_iter = 1;
  o.tol = 0.0;
  const auto r = irelief(d, o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_NEAR(r.weights.norm(), 1.0, 1e-12);
}

TEST(Canberra, IdenticalListsAreZero) {
  const RankedListSet s{4, {{2, 0, 3, 1}, {2, 0, 3, 1}, {2, 0, 3, 1}}};
  EXPECT_EQ(canberra_stability(s).indicator, 0.0);
}

TEST(Canberra, ReversedTripleRawDistance) {
  const RankedListSet s{3, {{0, 1, 2}, {2, 1, 0}}};
  const auto r = canberra_stability(s);
  // brute-force pair loop on rank vectors
  const double ra[3] = {1, 2, 3}, rb[3] = {3, 2, 1};
  double raw = 0;
  for (int j = 0; j < 3; ++j) raw += std::abs(ra[j] - rb[j]) / (ra[j] + rb[j]);
  EXPECT_DOUBLE_EQ(raw, 1.0);
  EXPECT_DOUBLE_EQ(r.mean_distance, 1.0);
  EXPECT_EQ(r.pairs, 1u);
}

TEST(Canberra, ExpectationMatchesEnumeration) {
  for (Index p = 1; p <= 5; ++p)
    for (Index k = 1; k <= p; ++k) {
      std::vector<Index> a(p), b(p);
      std::iota(a.begin(), a.end(), 0);
      double total = 0;
      double count = 0;
      do {
        std::iota(b.begin(), b.end(), 0);
        do {
          const auto ra = truncated_ranks(a, p, k), rb = truncated_ranks(b, p, k);
          total += canberra_distance(ra, rb);
          count += 1;
        } while (std::next_permutation(b.begin(), b.end()));
      } while (std::next_permutation(a.begin(), a.end()));
      EXPECT_NEAR(canberra_expectation(p, k), total / count, 1e-12) << p << " " << k;
    }
}

TEST(Canberra, RandomPermutationsNormalizeToOne) {
  std::mt19937_64 gen(11);
  RankedListSet s{30, {}};
  for (int i = 0; i < 200; ++i) s.lists.push_back(random_permutation(gen, 30));
  EXPECT_NEAR(canberra_stability(s).indicator, 1.0, 0.05);
  // Monte Carlo estimate of the expectation
  double mc = 0;
  for (int t = 0; t < 100000; ++t) {
    const auto a = truncated_ranks(random_permutation(gen, 30), 30, 30);
    const auto b = truncated_ranks(random_permutation(gen, 30), 30, 30);
    mc += canberra_distance(a, b) / 100000.0;
  }
  EXPECT_NEAR(mc / canberra_expectation(30, 30), 1.0, 0.01);
}

TEST(Canberra, TopKPrefixListsAndRelabeling) {
  std::mt19937_64 gen(12);
  RankedListSet full{12, {}}, prefix{12, {}}, relabeled{12, {}};
  const auto sigma = random_permutation(gen, 12);
  for (int i = 0; i < 6; ++i) {
    auto l = random_permutation(gen, 12);
    full.lists.push_back(l);
    prefix.lists.emplace_back(l.begin(), l.begin() + 4);
    std::vector<Index> m(12);
    for (Index j = 0; j < 12; ++j) m[j] = sigma[l[j]];
    relabeled.lists.push_back(m);
  }
  EXPECT_DOUBLE_EQ(canberra_stability(full, 4).indicator, canberra_stability(prefix).indicator);
  EXPECT_DOUBLE_EQ(canberra_stability(full).indicator, canberra_stability(relabeled).indicator);
  EXPECT_DOUBLE_EQ(canberra_stability(full, 5).indicator, canberra_stability(relabeled, 5).indicator);
  EXPECT_THROW(canberra_stability(prefix, 5), InvalidParameter);
}

TEST(Canberra, InvalidLists) {
  EXPECT_THROW(canberra_stability(RankedListSet{3, {{0, 1, 2}}}), InvalidLists);
  EXPECT_THROW(canberra_stability(RankedListSet{3, {{0, 1, 2}, {0, 1}}}), InvalidLists);
  EXPECT_THROW(canberra_stability(RankedListSet{3, {{0, 1, 2}, {0, 1, 3}}}), InvalidLists);
  EXPECT_THROW(canberra_stability(RankedListSet{3, {{0, 1, 1}, {0, 1, 2}}}), InvalidLists);
}
