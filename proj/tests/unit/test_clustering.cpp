#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mlcore/clustering.hpp"
#include "testing.hpp"

using namespace mlcore;
using mlcore::testing::random_matrix;

namespace {

constexpr Linkage kMethods[] = {Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward};

/// Naive agglomeration: every step rescans all cluster pairs, computing each
/// cluster distance from the point-level matrix. Ward uses the energy identity
/// on squared Euclidean input.
Dendrogram naive_linkage(const std::vector<double>& D, Index n, Linkage method) {
  auto d = [&](Index i, Index j) { return i == j ? 0.0 : D[condensed_index(n, i, j)]; };
  std::vector<std::vector<Index>> clusters;
  std::vector<Index> ids;
  for (Index i = 0; i < n; ++i) clusters.push_back({i}), ids.push_back(i);
  auto within = [&](const std::vector<Index>& A) {
    double s = 0;
    for (Index i : A)
      for (Index j : A) s += d(i, j);
    return s;
  };
  auto cluster_distance = [&](const std::vector<Index>& A, const std::vector<Index>& B) {
    double mn = 1e300, mx = -1e300, sum = 0;
    for (Index i : A)
      for (Index j : B) {
        mn = std::min(mn, d(i, j));
        mx = std::max(mx, d(i, j));
        sum += d(i, j);
      }
    const double na = double(A.size()), nb = double(B.size());
    switch (method) {
      case Linkage::Single: return mn;
      case Linkage::Complete: return mx;
      case Linkage::Average: return sum / (na * nb);
      case Linkage::Ward: {
        const double centroid_gap = sum / (na * nb) - within(A) / (2 * na * na) - within(B) / (2 * nb * nb);
        return 2 * na * nb / (na + nb) * centroid_gap;
      }
    }
    return 0.0;
  };
  Dendrogram out{n, {}};
  for (Index step = 0; step + 1 < n; ++step) {
    Index bi = 0, bj = 0;
    double best = 1e300;
    std::pair<Index, Index> best_ids{2 * n, 2 * n};
    for (Index i = 0; i < clusters.size(); ++i)
      for (Index j = i + 1; j < clusters.size(); ++j) {
        const double v = cluster_distance(clusters[i], clusters[j]);
        const std::pair<Index, Index> p{std::min(ids[i], ids[j]), std::max(ids[i], ids[j])};
        if (v < best - 1e-12 || (std::abs(v - best) <= 1e-12 && p < best_ids)) best = v, bi = i, bj = j, best_ids = p;
      }
    auto merged = clusters[bi];
    merged.insert(merged.end(), clusters[bj].begin(), clusters[bj].end());
    out.merges.push_back({best_ids.first, best_ids.second, best, merged.size()});
    clusters.erase(clusters.begin() + std::ptrdiff_t(bj));
    ids.erase(ids.begin() + std::ptrdiff_t(bj));
    clusters[bi] = merged;
    ids[bi] = n + step;
  }
  return out;
}

void expect_same(const Dendrogram& a, const Dendrogram& b, double tol) {
  ASSERT_EQ(a.merges.size(), b.merges.size());
  for (Index t = 0; t < a.merges.size(); ++t) {
    EXPECT_EQ(a.merges[t].a, b.merges[t].a) << "merge " << t;
    EXPECT_EQ(a.merges[t].b, b.merges[t].b) << "merge " << t;
    EXPECT_EQ(a.merges[t].size, b.merges[t].size) << "merge " << t;
    EXPECT_NEAR(a.merges[t].height, b.merges[t].height, tol) << "merge " << t;
  }
}

}  // namespace

TEST(Kmeans, KEqualsNIsExact) {
  const SampleMatrix X{{0, 0}, {1, 5}, {3, 2}, {-1, 4}};
  const auto r = kmeans(X, 4, 1);
  EXPECT_EQ(r.inertia, 0.0);
  std::set<Index> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 4u);
  for (Index i = 0; i < 4; ++i)
    EXPECT_EQ(Vector(r.centroids.row(Eigen::Index(r.assignments[i])).transpose()), Vector(X.row(i).transpose()));
}

TEST(Kmeans, SeparatedBlobsRecovered) {
  std::mt19937_64 gen(2);
  RowMatrix X = random_matrix(gen, 60, 2, 0.5);
  for (Index i = 30; i < 60; ++i) X(Eigen::Index(i), 0) += 50.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = kmeans(SampleMatrix(X), 2, seed);
    for (Index i = 0; i < 60; ++i) EXPECT_EQ(r.assignments[i] == r.assignments[0], i < 30);
  }
}

TEST(Kmeans, SingleClusterIsGlobalMean) {
  std::mt19937_64 gen(3);
  const RowMatrix X = random_matrix(gen, 25, 3);
  const auto r = kmeans(SampleMatrix(X), 1, 9);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  EXPECT_LT((r.centroids.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
  double total = 0;
  for (Eigen::Index i = 0; i < 25; ++i) total += (X.row(i) - mean).squaredNorm();
  EXPECT_NEAR(r.inertia, total, 1e-10);
}

TEST(Kmeans, InertiaNonIncreasingAndCentroidsAreMeans) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 10 + Index(gen() % 60);
    const Index k = 1 + Index(gen() % 6);
    const RowMatrix X = random_matrix(gen, n, 2);
    const auto r = kmeans(SampleMatrix(X), k, gen());
    for (Index t = 1; t < r.inertia_history.size(); ++t)
      EXPECT_LE(r.inertia_history[t], r.inertia_history[t - 1] * (1 + 1e-12) + 1e-12);
    EXPECT_GE(r.inertia, 0.0);
    if (!r.converged) continue;
    for (Index c = 0; c < k; ++c) {
      Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(2);
      double cnt = 0;
      for (Index i = 0; i < n; ++i)
        if (r.assignments[i] == c) s += X.row(Eigen::Index(i)), cnt += 1;
      if (cnt > 0) EXPECT_LT((s / cnt - r.centroids.row(Eigen::Index(c))).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Kmeans, EmptyClusterReseeded) {
  // duplicate rows: two initial centroids can coincide and one cluster empties
  const SampleMatrix X{{0, 0}, {0, 0}, {0, 0}, {10, 10}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = kmeans(X, 2, seed);
    EXPECT_EQ(r.inertia, 0.0);
  }
  EXPECT_THROW(kmeans(X, 5, 0), InvalidParameter);
}

TEST(Linkage, CollinearSingle) {
  const auto d = linkage(SampleMatrix{{0}, {1}, {10}}, Linkage::Single);
  ASSERT_EQ(d.merges.size(), 2u);
  EXPECT_EQ(d.merges[0].a, 0u);
  EXPECT_EQ(d.merges[0].b, 1u);
  EXPECT_EQ(d.merges[0].height, 1.0);
  EXPECT_EQ(d.merges[1].a, 2u);
  EXPECT_EQ(d.merges[1].b, 3u);
  EXPECT_EQ(d.merges[1].height, 9.0);
  EXPECT_EQ(d.merges[1].size, 3u);
  EXPECT_EQ(cut(d, 2), (std::vector<Index>{0, 0, 1}));
}

TEST(Linkage, TwoPoints) {
  const std::vector<double> D{2.5};
  for (Linkage m : kMethods) {
    const auto d = linkage(D, m);
    ASSERT_EQ(d.merges.size(), 1u);
    EXPECT_EQ(d.merges[0].height, 2.5);
    const auto ms = linkage_memory_saving(SampleMatrix{{0.0}, {2.5}}, m);
    expect_same(ms, linkage(SampleMatrix{{0.0}, {2.5}}, m), 1e-12);
  }
}

TEST(Linkage, MalformedCondensedVector) {
  const std::vector<double> D{1, 2};
  EXPECT_THROW(linkage(D, Linkage::Single), ShapeMismatch);
  EXPECT_THROW(linkage(std::vector<double>{}, Linkage::Single), ShapeMismatch);
}

TEST(Linkage, CondensedLayout) {
  // (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
  EXPECT_EQ(condensed_index(4, 0, 1), 0u);
  EXPECT_EQ(condensed_index(4, 0, 3), 2u);
  EXPECT_EQ(condensed_index(4, 1, 2), 3u);
  EXPECT_EQ(condensed_index(4, 3, 2), 5u);
}

TEST(Linkage, TieBreaksOnSmallestIdPair) {
  // all pairwise distances equal
  const std::vector<double> D(6, 1.0);
  const auto d = linkage(D, Linkage::Average);
  EXPECT_EQ(d.merges[0].a, 0u);
  EXPECT_EQ(d.merges[0].b, 1u);
  EXPECT_EQ(d.merges[1].a, 2u);
  EXPECT_EQ(d.merges[1].b, 3u);
}

TEST(Linkage, MatchesNaiveOracleOnSmallInputs) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + Index(gen() % 7);
    std::vector<double> D(condensed_size(n));
    for (auto& v : D) v = u(gen);
    for (Linkage m : {Linkage::Single, Linkage::Complete, Linkage::Average})
      expect_same(linkage(D, m), naive_linkage(D, n, m), 1e-9);
    const SampleMatrix X(random_matrix(gen, n, 3));
    const auto Dw = pdist(X, true);
    expect_same(linkage(Dw, Linkage::Ward), naive_linkage(Dw, n, Linkage::Ward), 1e-9);
  }
}

TEST(Linkage, HeightsNonDecreasing) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const SampleMatrix X(random_matrix(gen, 5 + Index(gen() % 40), 2));
    for (Linkage m : kMethods) {
      const auto d = linkage(X, m);
      for (Index t = 1; t < d.merges.size(); ++t) EXPECT_GE(d.merges[t].height, d.merges[t - 1].height);
    }
  }
}

TEST(MemorySaving, AgreesWithStoredLinkage) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + Index(gen() % 49);
    const SampleMatrix X(random_matrix(gen, n, 1 + Index(gen() % 4)));
    for (Linkage m : kMethods) expect_same(linkage_memory_saving(X, m), canonical(linkage(X, m)), 1e-9);
  }
}

TEST(MemorySaving, DuplicatePointsMergeAtZero) {
  const SampleMatrix X{{0, 0}, {3, 1}, {3, 1}, {7, 2}};
  for (Linkage m : kMethods) {
    const auto d = linkage_memory_saving(X, m);
    EXPECT_EQ(d.merges[0].height, 0.0);
    EXPECT_EQ(d.merges[0].a, 1u);
    EXPECT_EQ(d.merges[0].b, 2u);
  }
}

TEST(Cut, Extremes) {
  std::mt19937_64 gen(8);
  const SampleMatrix X(random_matrix(gen, 12, 2));
  const auto d = linkage(X, Linkage::Average);
  EXPECT_EQ(cut(d, 1), std::vector<Index>(12, 0));
  std::vector<Index> alone(12);
  std::iota(alone.begin(), alone.end(), 0);
  EXPECT_EQ(cut(d, 12), alone);
  EXPECT_THROW(cut(d, 0), InvalidParameter);
  EXPECT_THROW(cut(d, 13), InvalidParameter);
  for (Index k = 1; k <= 12; ++k) {
    const auto lab = cut(d, k);
    EXPECT_EQ(std::set<Index>(lab.begin(), lab.end()).size(), k);
    Index seen = 0;
    for (Index l : lab) {  // labels appear in order of smallest leaf
      EXPECT_LE(l, seen);
      if (l == seen) ++seen;
    }
  }
}
