#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/rng.hpp"

namespace mlcore {

// ---- k-means ----

struct KmeansOptions {
  Index max_iter = 300;
  double tol = 1e-8;
};

struct KmeansResult {
  Matrix centroids;  // k x p
  std::vector<Index> assignments;
  double inertia = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> inertia_history;  // after every assignment step, then the final value
};

namespace detail {

inline double assign(const RowMatrix& X, const Matrix& C, std::vector<Index>& out, std::vector<double>& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < C.rows(); ++c) {
      const double d = (X.row(i) - C.row(c)).squaredNorm();
      if (d < bd) bd = d, best = Index(c);
    }
    out[Index(i)] = best;
    dist[Index(i)] = bd;
    inertia += bd;
  }
  return inertia;
}

}  // namespace detail

/// Lloyd's algorithm from k distinct samples drawn with the seeded generator.
/// A cluster that empties is moved onto the sample farthest from its own
/// centroid.
inline KmeansResult kmeans(const SampleMatrix& Xs, Index k, std::uint64_t seed, const KmeansOptions& o = {}) {
  const Index n = Xs.rows();
  if (k < 1 || k > n)
    throw InvalidParameter("kmeans k must be in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  const RowMatrix& X = Xs.values();
  KmeansResult r;
  r.centroids.resize(Eigen::Index(k), X.cols());
  const auto perm = Rng(seed).permutation(n);
  for (Index c = 0; c < k; ++c) r.centroids.row(Eigen::Index(c)) = X.row(Eigen::Index(perm[c]));
  r.assignments.assign(n, 0);
  std::vector<double> dist(n);

  while (r.iterations < o.max_iter) {
    ++r.iterations;
    r.inertia_history.push_back(detail::assign(X, r.centroids, r.assignments, dist));
    Matrix next = Matrix::Zero(Eigen::Index(k), X.cols());
    std::vector<Index> counts(k, 0);
    for (Index i = 0; i < n; ++i) {
      next.row(Eigen::Index(r.assignments[i])) += X.row(Eigen::Index(i));
      ++counts[r.assignments[i]];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(Eigen::Index(c)) /= double(counts[c]);
        continue;
      }
      const Index far = Index(std::max_element(dist.begin(), dist.end()) - dist.begin());
      next.row(Eigen::Index(c)) = X.row(Eigen::Index(far));
      dist[far] = 0.0;
    }
    const double shift = (next - r.centroids).rowwise().norm().maxCoeff();
    r.centroids = std::move(next);
    if (shift < o.tol) {
      r.converged = true;
      break;
    }
  }
  r.inertia = 0.0;
  for (Index i = 0; i < n; ++i)
    r.inertia += (X.row(Eigen::Index(i)) - r.centroids.row(Eigen::Index(r.assignments[i]))).squaredNorm();
  r.inertia_history.push_back(r.inertia);
  return r;
}

// ---- hierarchical ----

enum class Linkage { Single, Complete, Average, Ward };

inline constexpr std::string_view to_string(Linkage m) noexcept {
  switch (m) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
    case Linkage::Ward: return "ward";
  }
  return "?";
}

inline Linkage linkage_from_string(std::string_view s) {
  for (Linkage m : {Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward})
    if (s == to_string(m)) return m;
  throw InvalidParameter("unknown linkage method '" + std::string(s) + "'");
}

/// Merge t creates cluster id n + t; a < b.
struct Merge {
  Index a = 0, b = 0;
  double height = 0.0;
  Index size = 0;
};

struct Dendrogram {
  Index leaves = 0;
  std::vector<Merge> merges;
};

/// Row-major upper triangle: entry (i, j), i < j, sits at n*i - i*(i+1)/2 + j - i - 1.
inline Index condensed_index(Index n, Index i, Index j) {
  if (i > j) std::swap(i, j);
  return n * i - i * (i + 1) / 2 + (j - i - 1);
}

inline Index condensed_size(Index n) { return n * (n - 1) / 2; }

/// Pairwise Euclidean (or squared Euclidean) distances in condensed layout.
inline std::vector<double> pdist(const SampleMatrix& Xs, bool squared = false) {
  const RowMatrix& X = Xs.values();
  const Index n = Xs.rows();
  std::vector<double> D;
  D.reserve(condensed_size(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d2 = (X.row(Eigen::Index(i)) - X.row(Eigen::Index(j))).squaredNorm();
      D.push_back(squared ? d2 : std::sqrt(d2));
    }
  return D;
}

inline Index leaves_from_condensed(Index m) {
  const auto n = Index(std::llround((1.0 + std::sqrt(1.0 + 8.0 * double(m))) / 2.0));
  if (n < 2 || condensed_size(n) != m)
    throw ShapeMismatch("condensed distance vector of length " + std::to_string(m) + " is not n(n-1)/2");
  return n;
}

namespace detail {

inline double lance_williams(Linkage m, double dak, double dbk, double dab, double na, double nb, double nk) {
  switch (m) {
    case Linkage::Single: return std::min(dak, dbk);
    case Linkage::Complete: return std::max(dak, dbk);
    case Linkage::Average: return (na * dak + nb * dbk) / (na + nb);
    case Linkage::Ward: return ((na + nk) * dak + (nb + nk) * dbk - nk * dab) / (na + nb + nk);
  }
  return 0.0;
}

}  // namespace detail

/// Stable sort of merges by height with internal ids renumbered to match.
inline Dendrogram canonical(const Dendrogram& d) {
  const Index n = d.leaves;
  std::vector<Index> order(d.merges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return d.merges[x].height < d.merges[y].height; });
  std::vector<Index> renum(d.merges.size());
  for (Index t = 0; t < order.size(); ++t) renum[order[t]] = t;
  auto id = [&](Index c) { return c < n ? c : n + renum[c - n]; };
  Dendrogram out{n, {}};
  for (Index t : order) {
    Merge m = d.merges[t];
    m.a = id(m.a);
    m.b = id(m.b);
    if (m.a > m.b) std::swap(m.a, m.b);
    out.merges.push_back(m);
  }
  return out;
}

/// Agglomerative clustering on a stored condensed matrix with Lance-Williams
/// updates. The closest pair is found by a full scan; equal distances go to
/// the lexicographically smallest (id a, id b). Ward expects squared
/// Euclidean input and reports Lance-Williams heights on that scale.
inline Dendrogram linkage(std::span<const double> condensed, Linkage method) {
  const Index n = leaves_from_condensed(condensed.size());
  for (double v : condensed)
    if (!std::isfinite(v) || v < 0.0) throw InvalidData("distances must be finite and non-negative");
  std::vector<double> D(condensed.begin(), condensed.end());
  std::vector<Index> id(n), size(n, 1);
  std::iota(id.begin(), id.end(), 0);
  std::vector<bool> active(n, true);
  Dendrogram out{n, {}};
  for (Index step = 0; step + 1 < n; ++step) {
    Index bi = n, bj = n;
    double best = std::numeric_limits<double>::infinity();
    std::pair<Index, Index> best_ids{n * 2, n * 2};
    for (Index i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (Index j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double v = D[condensed_index(n, i, j)];
        const std::pair<Index, Index> ids{std::min(id[i], id[j]), std::max(id[i], id[j])};
        if (v < best || (v == best && ids < best_ids)) best = v, bi = i, bj = j, best_ids = ids;
      }
    }
    const double na = double(size[bi]), nb = double(size[bj]);
    for (Index k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      double& dik = D[condensed_index(n, bi, k)];
      dik = detail::lance_williams(method, dik, D[condensed_index(n, bj, k)], best, na, nb, double(size[k]));
    }
    out.merges.push_back({best_ids.first, best_ids.second, best, size[bi] + size[bj]});
    active[bj] = false;
    size[bi] += size[bj];
    id[bi] = n + step;
  }
  return out;
}

/// Convenience: Euclidean distances for single/complete/average, squared
/// Euclidean for ward.
inline Dendrogram linkage(const SampleMatrix& X, Linkage method) {
  if (X.rows() < 2) throw ShapeMismatch("linkage needs at least 2 samples");
  return linkage(pdist(X, method == Linkage::Ward), method);
}

/// Nearest-neighbour chain with cluster distances recomputed from the samples
/// on demand: O(n) extra memory. Ward uses centroids and sizes,
/// d = 2 na nb / (na + nb) |ca - cb|^2, which equals the Lance-Williams value
/// on squared Euclidean input. Output is canonical (sorted by height).
inline Dendrogram linkage_memory_saving(const SampleMatrix& Xs, Linkage method) {
  const RowMatrix& X = Xs.values();
  const Index n = Xs.rows();
  if (n < 2) throw ShapeMismatch("linkage needs at least 2 samples");
  std::vector<std::vector<Index>> members(2 * n - 1);
  Matrix centroid(Eigen::Index(2 * n - 1), X.cols());
  for (Index i = 0; i < n; ++i) {
    members[i] = {i};
    centroid.row(Eigen::Index(i)) = X.row(Eigen::Index(i));
  }
  auto point = [&](Index i, Index j) { return (X.row(Eigen::Index(i)) - X.row(Eigen::Index(j))).norm(); };
  auto dist = [&](Index a, Index b) {
    const auto& A = members[a];
    const auto& B = members[b];
    if (method == Linkage::Ward) {
      const double na = double(A.size()), nb = double(B.size());
      return 2.0 * na * nb / (na + nb) * (centroid.row(Eigen::Index(a)) - centroid.row(Eigen::Index(b))).squaredNorm();
    }
    double acc = method == Linkage::Single ? std::numeric_limits<double>::infinity() : 0.0;
    for (Index i : A)
      for (Index j : B) {
        const double d = point(i, j);
        if (method == Linkage::Single) acc = std::min(acc, d);
        else if (method == Linkage::Complete) acc = std::max(acc, d);
        else acc += d;
      }
    return method == Linkage::Average ? acc / (double(A.size()) * double(B.size())) : acc;
  };

  std::vector<Index> active(n);
  std::iota(active.begin(), active.end(), 0);
  std::vector<Index> chain;
  Dendrogram raw{n, {}};
  Index next_id = n;
  while (active.size() > 1) {
    if (chain.empty()) chain.push_back(active.front());
    const Index a = chain.back();
    const Index prev = chain.size() >= 2 ? chain[chain.size() - 2] : 2 * n;
    Index b = 2 * n;
    double bd = std::numeric_limits<double>::infinity();
    for (Index c : active) {
      if (c == a) continue;
      const double d = dist(a, c);
      if (d < bd || (d == bd && (c == prev || (b != prev && c < b)))) bd = d, b = c;
    }
    if (b == prev) {
      chain.pop_back();
      chain.pop_back();
      const Index lo = std::min(a, b), hi = std::max(a, b);
      const Index m = next_id++;
      members[m] = members[lo];
      members[m].insert(members[m].end(), members[hi].begin(), members[hi].end());
      const double na = double(members[lo].size()), nb = double(members[hi].size());
      centroid.row(Eigen::Index(m)) = (na * centroid.row(Eigen::Index(lo)) + nb * centroid.row(Eigen::Index(hi))) / (na + nb);
      members[lo].clear();
      members[lo].shrink_to_fit();
      members[hi].clear();
      members[hi].shrink_to_fit();
      raw.merges.push_back({lo, hi, bd, members[m].size()});
      active.erase(std::remove_if(active.begin(), active.end(), [&](Index c) { return c == lo || c == hi; }),
                   active.end());
      active.push_back(m);
    } else {
      chain.push_back(b);
    }
  }
  return canonical(raw);
}

/// Flat clusters from the first n - k merges, labelled 0..k-1 in order of
/// their smallest leaf.
inline std::vector<Index> cut(const Dendrogram& d, Index k) {
  const Index n = d.leaves;
  if (k < 1 || k > n) throw InvalidParameter("cut k must be in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  std::vector<Index> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (Index t = 0; t + k < n; ++t) {
    parent[find(d.merges[t].a)] = n + t;
    parent[find(d.merges[t].b)] = n + t;
  }
  std::vector<Index> label(2 * n - 1, n), out(n);
  Index next = 0;
  for (Index i = 0; i < n; ++i) {
    const Index root = find(i);
    if (label[root] == n) label[root] = next++;
    out[i] = label[root];
  }
  return out;
}

}  // namespace mlcore
