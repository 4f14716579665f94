#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/kernels.hpp"

namespace mlcore {

// ---- k-nearest neighbours ----

struct KnnModel {
  RowMatrix inputs;
  std::vector<Label> labels;
  std::vector<Label> classes;
  Index k = 1;
};

inline KnnModel knn_fit(const LabeledDataset& d, Index k) {
  if (k < 1 || k > d.size())
    throw InvalidParameter("knn k must be in [1, " + std::to_string(d.size()) + "], got " + std::to_string(k));
  KnnModel m{d.x.values(), d.labels(), {}, k};
  m.classes = m.labels;
  std::sort(m.classes.begin(), m.classes.end());
  m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
  return m;
}

inline Label knn_predict(const KnnModel& m, std::span<const double> x) {
  if (Eigen::Index(x.size()) != m.inputs.cols())
    throw ShapeMismatch("knn model expects " + std::to_string(m.inputs.cols()) + " features, got " +
                        std::to_string(x.size()));
  const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), Eigen::Index(x.size()));
  const Index n = m.labels.size();
  std::vector<std::pair<double, Index>> dist(n);
  for (Index i = 0; i < n; ++i) dist[i] = {(m.inputs.row(Eigen::Index(i)) - q).squaredNorm(), i};
  std::partial_sort(dist.begin(), dist.begin() + std::ptrdiff_t(m.k), dist.end());
  std::vector<Index> votes(m.classes.size(), 0);
  for (Index r = 0; r < m.k; ++r) {
    const Label l = m.labels[dist[r].second];
    ++votes[Index(std::lower_bound(m.classes.begin(), m.classes.end(), l) - m.classes.begin())];
  }
  return m.classes[Index(std::max_element(votes.begin(), votes.end()) - votes.begin())];
}

inline std::vector<Label> knn_predict(const KnnModel& m, const SampleMatrix& X) {
  std::vector<Label> out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::RowVectorXd row = X.row(i);
    out[i] = knn_predict(m, std::span<const double>(row.data(), Index(row.size())));
  }
  return out;
}

// ---- Parzen mean-difference classifier ----

/// g(z) = mean_{i in +} k(z, x_i) - mean_{i in -} k(z, x_i) - b; g >= 0 goes
/// to the positive (larger) class.
struct ParzenModel {
  std::vector<Label> classes;
  Vector weights;  // 1/n+ on positive samples, -1/n- on negative ones
  double threshold = 0.0;
  KernelSpec kernel = KernelSpec::precomputed();
  RowMatrix training_inputs;
};

inline ParzenModel parzen_fit(const GramMatrix& K, std::span<const Label> labels) {
  if (!K.square()) throw ShapeMismatch("parzen needs a square Gram matrix");
  if (labels.size() != K.rows()) throw ShapeMismatch("label count != Gram size");
  const LabelEncoder enc(labels);
  if (!enc.binary()) throw InvalidLabels("parzen classifier is binary-only");
  ParzenModel m;
  m.classes = enc.classes();
  const Vector s = enc.encode(labels);
  const double npos = (s.array() > 0).count(), nneg = double(s.size()) - npos;
  m.weights = s.unaryExpr([&](double v) { return v > 0 ? 1.0 / npos : -1.0 / nneg; });
  return m;
}

inline ParzenModel parzen_fit(const LabeledDataset& d, const KernelSpec& kernel) {
  ParzenModel m = parzen_fit(gram(kernel, d.x), d.labels());
  m.kernel = kernel;
  m.training_inputs = d.x.values();
  return m;
}

inline Vector parzen_decision(const ParzenModel& m, const Matrix& cross_gram) {
  if (cross_gram.cols() != m.weights.size())
    throw ShapeMismatch("cross-Gram needs " + std::to_string(m.weights.size()) + " columns");
  Vector g = cross_gram * m.weights;
  g.array() -= m.threshold;
  return g;
}

inline Vector parzen_decision(const ParzenModel& m, const SampleMatrix& X) {
  if (!m.kernel.needs_data()) throw UnsupportedKernel("precomputed-kernel model needs cross-Gram rows");
  if (Eigen::Index(X.cols()) != m.training_inputs.cols()) throw ShapeMismatch("feature count mismatch");
  return parzen_decision(m, detail::gram_raw(m.kernel, X.values(), m.training_inputs, false));
}

template <class Input>
std::vector<Label> parzen_predict(const ParzenModel& m, const Input& input) {
  const Vector g = parzen_decision(m, input);
  std::vector<Label> out(Index(g.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) out[Index(i)] = g[i] >= 0.0 ? m.classes[1] : m.classes[0];
  return out;
}

// ---- classification tree ----

struct TreeNode {
  bool leaf = true;
  Index feature = 0;
  double threshold = 0.0;
  Index left = 0, right = 0;  // node indices
  Label label = 0;
  std::vector<Index> counts;  // per class of the owning tree
  Index depth = 0;
};

struct TreeModel {
  std::vector<Label> classes;
  std::vector<TreeNode> nodes;  // root first
  Index features = 0;

  Index depth() const {
    Index d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }
  Index leaves() const {
    return Index(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
  }
};

struct TreeOptions {
  Index min_leaf = 1;
  std::optional<Index> max_depth;
};

inline double gini(std::span<const Index> counts) {
  double total = 0, sq = 0;
  for (Index c : counts) total += double(c);
  if (total == 0) return 0.0;
  for (Index c : counts) sq += (double(c) / total) * (double(c) / total);
  return 1.0 - sq;
}

namespace detail {

struct TreeBuilder {
  const RowMatrix& X;
  const std::vector<Index>& y;  // class indices
  Index num_classes;
  TreeOptions opt;
  std::vector<TreeNode> nodes;

  std::vector<Index> count(const std::vector<Index>& rows) const {
    std::vector<Index> c(num_classes, 0);
    for (Index r : rows) ++c[y[r]];
    return c;
  }

  Index build(std::vector<Index> rows, Index depth) {
    const Index id = nodes.size();
    nodes.emplace_back();
    TreeNode node;
    node.counts = count(rows);
    node.depth = depth;
    node.label = Index(std::max_element(node.counts.begin(), node.counts.end()) - node.counts.begin());
    const double parent = gini(node.counts);
    const double n = double(rows.size());

    bool found = false;
    double best = parent;
    Index best_f = 0;
    double best_t = 0.0;
    const bool can_split = parent > 0.0 && (!opt.max_depth || depth < *opt.max_depth) &&
                           rows.size() >= 2 * opt.min_leaf;
    if (can_split) {
      std::vector<Index> order = rows;
      for (Eigen::Index f = 0; f < X.cols(); ++f) {
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return X(Eigen::Index(a), f) < X(Eigen::Index(b), f); });
        std::vector<Index> left(num_classes, 0), right = node.counts;
        for (Index i = 0; i + 1 < order.size(); ++i) {
          ++left[y[order[i]]];
          --right[y[order[i]]];
          const double v = X(Eigen::Index(order[i]), f), next = X(Eigen::Index(order[i + 1]), f);
          if (!(v < next)) continue;
          const Index nl = i + 1, nr = order.size() - nl;
          if (nl < opt.min_leaf || nr < opt.min_leaf) continue;
          const double score = (double(nl) * gini(left) + double(nr) * gini(right)) / n;
          if (score < best) {
            best = score;
            best_f = Index(f);
            best_t = v + 0.5 * (next - v);
            found = true;
          }
        }
      }
    }
    if (found) {
      node.leaf = false;
      node.feature = best_f;
      node.threshold = best_t;
      std::vector<Index> lrows, rrows;
      for (Index r : rows) (X(Eigen::Index(r), Eigen::Index(best_f)) <= best_t ? lrows : rrows).push_back(r);
      rows.clear();
      rows.shrink_to_fit();
      node.left = build(std::move(lrows), depth + 1);
      node.right = build(std::move(rrows), depth + 1);
    }
    nodes[id] = std::move(node);
    return id;
  }
};

}  // namespace detail

/// CART on Gini impurity. A split is kept only when it strictly lowers the
/// weighted impurity; ties between candidate splits keep the lowest feature
/// and threshold.
inline TreeModel tree_fit(const LabeledDataset& d, const TreeOptions& opt = {}) {
  if (opt.min_leaf < 1) throw InvalidParameter("tree min_leaf must be >= 1");
  const auto labels = d.labels();
  TreeModel t;
  t.classes = labels;
  std::sort(t.classes.begin(), t.classes.end());
  t.classes.erase(std::unique(t.classes.begin(), t.classes.end()), t.classes.end());
  std::vector<Index> y(labels.size());
  for (Index i = 0; i < y.size(); ++i)
    y[i] = Index(std::lower_bound(t.classes.begin(), t.classes.end(), labels[i]) - t.classes.begin());
  t.features = d.x.cols();
  detail::TreeBuilder b{d.x.values(), y, t.classes.size(), opt, {}};
  std::vector<Index> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  b.build(std::move(rows), 0);
  t.nodes = std::move(b.nodes);
  for (auto& n : t.nodes) n.label = t.classes[Index(n.label)];
  return t;
}

/// Index of the leaf reached by x; x[feature] <= threshold goes left.
inline Index tree_leaf(const TreeModel& t, std::span<const double> x) {
  if (x.size() != t.features)
    throw ShapeMismatch("tree expects " + std::to_string(t.features) + " features, got " + std::to_string(x.size()));
  Index id = 0;
  while (!t.nodes[id].leaf) id = x[t.nodes[id].feature] <= t.nodes[id].threshold ? t.nodes[id].left : t.nodes[id].right;
  return id;
}

inline Label tree_predict(const TreeModel& t, std::span<const double> x) { return t.nodes[tree_leaf(t, x)].label; }

inline std::vector<Label> tree_predict(const TreeModel& t, const SampleMatrix& X) {
  std::vector<Label> out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::RowVectorXd row = X.row(i);
    out[i] = tree_predict(t, std::span<const double>(row.data(), Index(row.size())));
  }
  return out;
}

}  // namespace mlcore
