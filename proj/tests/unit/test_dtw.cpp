#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "mlcore/dtw.hpp"

using namespace mlcore;

namespace {

/// Minimum over every monotone path with unit steps, by exhaustive recursion.
double brute_force(const std::vector<double>& x, const std::vector<double>& y, std::optional<std::size_t> window = {}) {
  const std::size_t n = x.size(), m = y.size();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    if (window && (i > j ? i - j : j - i) > *window) return;
    acc += std::abs(x[i] - y[j]);
    if (acc >= best) return;
    if (i == n - 1 && j == m - 1) {
      best = acc;
      return;
    }
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

std::vector<double> random_series(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& e : v) e = u(gen);
  return v;
}

double path_cost(const WarpResult& r, const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (auto [i, j] : r.path) s += std::abs(x[i] - y[j]);
  return s;
}

}  // namespace

TEST(Dtw, IdenticalSignalsFollowDiagonal) {
  const std::vector<double> x{0.5, -1.0, 2.0, 2.0, 3.0};
  const auto r = dtw(x, x);
  EXPECT_EQ(r.distance, 0.0);
  ASSERT_EQ(r.path.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(r.path[i], std::make_pair(i, i));
}

TEST(Dtw, ShortExampleByEnumeration) {
  const std::vector<double> x{0, 1, 2}, y{0, 2};
  const auto r = dtw(x, y);
  EXPECT_EQ(brute_force(x, y), 1.0);
  EXPECT_EQ(r.distance, 1.0);
  // two optimal paths tie at (2,1); the diagonal predecessor (1,0) wins
  const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 0}, {1, 0}, {2, 1}};
  EXPECT_EQ(r.path, expected);
}

TEST(Dtw, MatchesExhaustiveSearch) {
  std::mt19937_64 gen(1);
  for (std::size_t n = 1; n <= 8; ++n)
    for (std::size_t m = 1; m <= 8; ++m) {
      const auto x = random_series(gen, n), y = random_series(gen, m);
      const auto r = dtw(x, y);
      EXPECT_NEAR(r.distance, brute_force(x, y), 1e-12);
      EXPECT_NEAR(path_cost(r, x, y), r.distance, 1e-12);
    }
}

TEST(Dtw, PathIsMonotoneWithUnitSteps) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_series(gen, 1 + gen() % 40), y = random_series(gen, 1 + gen() % 40);
    const auto r = dtw(x, y);
    ASSERT_EQ(r.path.front(), std::make_pair(std::size_t(0), std::size_t(0)));
    ASSERT_EQ(r.path.back(), std::make_pair(x.size() - 1, y.size() - 1));
    for (std::size_t s = 1; s < r.path.size(); ++s) {
      const auto di = r.path[s].first - r.path[s - 1].first, dj = r.path[s].second - r.path[s - 1].second;
      EXPECT_TRUE((di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1));
    }
    EXPECT_NEAR(dtw(y, x).distance, r.distance, 1e-12);
    EXPECT_GE(r.distance, 0.0);
  }
}

TEST(Dtw, BandedNeverBelowUnbanded) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen() % 8, m = 1 + gen() % 8;
    const auto x = random_series(gen, n), y = random_series(gen, m);
    const std::size_t w = (n > m ? n - m : m - n) + gen() % 3;
    const auto banded = dtw(x, y, w);
    EXPECT_NEAR(banded.distance, brute_force(x, y, w), 1e-12);
    EXPECT_GE(banded.distance, dtw(x, y).distance - 1e-12);
    for (auto [i, j] : banded.path) EXPECT_LE(i > j ? i - j : j - i, w);
  }
}

TEST(Dtw, Errors) {
  EXPECT_THROW(dtw(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1}, 2), InvalidWindow);
  EXPECT_THROW(dtw(std::vector<double>{}, std::vector<double>{1.0}), InvalidLength);
}

TEST(Dtw, ZeroCostAlignmentGivesZero) {
  const std::vector<double> x{1, 1, 2, 3, 3, 3}, y{1, 2, 2, 3};
  EXPECT_EQ(dtw(x, y).distance, 0.0);
  EXPECT_GT(dtw(x, std::vector<double>{1, 3, 2}).distance, 0.0);
}

TEST(Dtw, MultivariateEuclidean) {
  Eigen::MatrixXd a(3, 2), b(2, 2);
  a << 0, 0, 3, 4, 6, 8;
  b << 0, 0, 6, 8;
  const auto r = dtw(a, b);
  EXPECT_NEAR(r.distance, 5.0, 1e-12);
  Eigen::MatrixXd c(2, 3);
  EXPECT_THROW(dtw(a, c), ShapeMismatch);
  // one channel reduces to the scalar form
  Eigen::MatrixXd x(4, 1), y(3, 1);
  x << 0, 1, 5, 2;
  y << 1, 4, 2;
  EXPECT_NEAR(dtw(x, y).distance, dtw(std::vector<double>{0, 1, 5, 2}, std::vector<double>{1, 4, 2}).distance, 1e-15);
}
