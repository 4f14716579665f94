#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlcore/error.hpp"

namespace mlcore {

struct WarpResult {
  double distance = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (0,0) .. (n-1,m-1)
};

namespace detail {

/// Cumulative-cost DP over steps (1,0), (0,1), (1,1) inside the optional
/// Sakoe-Chiba band |i - j| <= window. Backtracking prefers the diagonal, then
/// (i-1, j), then (i, j-1) on equal cumulative cost.
template <class Cost>
WarpResult warp(std::size_t n, std::size_t m, std::optional<std::size_t> window, Cost&& cost) {
  if (n == 0 || m == 0) throw InvalidLength("dtw needs non-empty series");
  if (window && (n > m ? n - m : m - n) > *window)
    throw InvalidWindow("band radius " + std::to_string(*window) + " cannot reach the endpoint of " +
                        std::to_string(n) + "x" + std::to_string(m));
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto inside = [&](std::size_t i, std::size_t j) { return !window || (i > j ? i - j : j - i) <= *window; };
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(Eigen::Index(n), Eigen::Index(m), inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return D(Eigen::Index(i), Eigen::Index(j)); };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (!inside(i, j)) continue;
      double prev = 0.0;
      if (i > 0 || j > 0) {
        prev = inf;
        if (i > 0 && j > 0) prev = std::min(prev, at(i - 1, j - 1));
        if (i > 0) prev = std::min(prev, at(i - 1, j));
        if (j > 0) prev = std::min(prev, at(i, j - 1));
      }
      at(i, j) = cost(i, j) + prev;
    }
  WarpResult r;
  r.distance = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) --j;
    else if (j == 0) --i;
    else {
      const double dg = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
      if (dg <= up && dg <= left) --i, --j;
      else if (up <= left) --i;
      else --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

}  // namespace detail

/// Scalar series with local cost |a - b|.
inline WarpResult dtw(const std::vector<double>& x, const std::vector<double>& y,
                      std::optional<std::size_t> window = std::nullopt) {
  return detail::warp(x.size(), y.size(), window, [&](std::size_t i, std::size_t j) { return std::abs(x[i] - y[j]); });
}

/// Multivariate series, one time step per row, Euclidean local cost.
inline WarpResult dtw(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      std::optional<std::size_t> window = std::nullopt) {
  if (x.cols() != y.cols())
    throw ShapeMismatch("dtw series have " + std::to_string(x.cols()) + " and " + std::to_string(y.cols()) +
                        " channels");
  return detail::warp(std::size_t(x.rows()), std::size_t(y.rows()), window, [&](std::size_t i, std::size_t j) {
    return (x.row(Eigen::Index(i)) - y.row(Eigen::Index(j))).norm();
  });
}

}  // namespace mlcore
