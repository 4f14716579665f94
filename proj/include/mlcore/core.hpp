#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlcore/error.hpp"
#include "mlcore/rng.hpp"

namespace mlcore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Label = std::int64_t;
using Index = std::size_t;

/// Dense n x p block of finite doubles, one sample per row.
class SampleMatrix {
 public:
  SampleMatrix() = default;

  explicit SampleMatrix(RowMatrix values) : values_(std::move(values)) { validate(); }

  explicit SampleMatrix(const Matrix& values) : values_(values) { validate(); }

  SampleMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = n == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
    values_.resize(n, p);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Eigen::Index>(row.size()) != p)
        throw ShapeMismatch("ragged initializer: row " + std::to_string(i));
      Eigen::Index j = 0;
      for (double v : row) values_(i, j++) = v;
      ++i;
    }
    validate();
  }

  Index rows() const noexcept { return static_cast<Index>(values_.rows()); }
  Index cols() const noexcept { return static_cast<Index>(values_.cols()); }
  bool empty() const noexcept { return values_.size() == 0; }

  const RowMatrix& values() const noexcept { return values_; }
  double operator()(Index i, Index j) const { return values_(Eigen::Index(i), Eigen::Index(j)); }
  auto row(Index i) const { return values_.row(Eigen::Index(i)); }

  SampleMatrix select_rows(std::span<const Index> idx) const {
    RowMatrix out(Eigen::Index(idx.size()), values_.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) = values_.row(Eigen::Index(idx[r]));
    return SampleMatrix(std::move(out));
  }

  SampleMatrix select_cols(std::span<const Index> idx) const {
    RowMatrix out(values_.rows(), Eigen::Index(idx.size()));
    for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) = values_.col(Eigen::Index(idx[c]));
    return SampleMatrix(std::move(out));
  }

 private:
  void validate() const {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw InvalidData("sample matrix needs at least one row and one column");
    if (!values_.allFinite()) throw InvalidData("sample matrix contains NaN or Inf");
  }

  RowMatrix values_;
};

/// Samples paired with targets. Classification labels are stored as
/// integral doubles; LabelEncoder checks integrality.
struct LabeledDataset {
  SampleMatrix x;
  Vector y;

  LabeledDataset() = default;
  LabeledDataset(SampleMatrix samples, Vector targets) : x(std::move(samples)), y(std::move(targets)) {
    if (Index(y.size()) != x.rows())
      throw ShapeMismatch("target length " + std::to_string(y.size()) + " != rows " +
                          std::to_string(x.rows()));
    if (!y.allFinite()) throw InvalidData("targets contain NaN or Inf");
  }
  LabeledDataset(SampleMatrix samples, const std::vector<Label>& labels)
      : LabeledDataset(std::move(samples), to_vector(labels)) {}

  Index size() const noexcept { return x.rows(); }
  Index features() const noexcept { return x.cols(); }

  std::vector<Label> labels() const {
    std::vector<Label> out(Index(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double v = y[i];
      if (v != std::floor(v)) throw InvalidLabels("non-integral label " + std::to_string(v));
      out[Index(i)] = static_cast<Label>(v);
    }
    return out;
  }

  LabeledDataset subset(std::span<const Index> idx) const {
    Vector t(Eigen::Index(idx.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = y[Eigen::Index(idx[i])];
    return LabeledDataset(x.select_rows(idx), std::move(t));
  }

  LabeledDataset with_features(std::span<const Index> cols) const {
    return LabeledDataset(x.select_cols(cols), y);
  }

  static Vector to_vector(const std::vector<Label>& labels) {
    Vector v(Eigen::Index(labels.size()));
    for (Index i = 0; i < labels.size(); ++i) v[Eigen::Index(i)] = static_cast<double>(labels[i]);
    return v;
  }
};

/// Maps arbitrary integer labels onto a canonical encoding: classes sorted
/// ascending; two classes become -1/+1 (smaller -> -1), more become 0..c-1.
class LabelEncoder {
 public:
  LabelEncoder() = default;

  /// Throws InvalidLabels when fewer than two distinct labels are present.
  explicit LabelEncoder(std::span<const Label> y) {
    if (y.empty()) throw InvalidLabels("empty label vector");
    classes_.assign(y.begin(), y.end());
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
    if (classes_.size() < 2)
      throw InvalidLabels("classification needs at least 2 distinct labels, got 1");
  }

  static LabelEncoder from_classes(std::vector<Label> classes) {
    LabelEncoder e;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw InvalidLabels("class table needs at least 2 labels");
    e.classes_ = std::move(classes);
    return e;
  }

  const std::vector<Label>& classes() const noexcept { return classes_; }
  Index num_classes() const noexcept { return classes_.size(); }
  bool binary() const noexcept { return classes_.size() == 2; }

  /// Position of a label in the sorted class table.
  Index index_of(Label label) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
    if (it == classes_.end() || *it != label)
      throw InvalidLabels("label " + std::to_string(label) + " not in class table");
    return Index(it - classes_.begin());
  }

  /// -1/+1 for binary tables, class index otherwise.
  double encode(Label label) const {
    const Index k = index_of(label);
    if (binary()) return k == 0 ? -1.0 : 1.0;
    return double(k);
  }

  Vector encode(std::span<const Label> y) const {
    Vector out(Eigen::Index(y.size()));
    for (Index i = 0; i < y.size(); ++i) out[Eigen::Index(i)] = encode(y[i]);
    return out;
  }

  std::vector<Index> indices(std::span<const Label> y) const {
    std::vector<Index> out(y.size());
    for (Index i = 0; i < y.size(); ++i) out[i] = index_of(y[i]);
    return out;
  }

  Label decode(double code) const {
    if (binary()) return code < 0 ? classes_[0] : classes_[1];
    const auto k = static_cast<Index>(code);
    if (code < 0 || k >= classes_.size() || double(k) != code)
      throw InvalidLabels("code out of range: " + std::to_string(code));
    return classes_[k];
  }

  std::vector<Label> decode(const Vector& codes) const {
    std::vector<Label> out(Index(codes.size()));
    for (Eigen::Index i = 0; i < codes.size(); ++i) out[Index(i)] = decode(codes[i]);
    return out;
  }

 private:
  std::vector<Label> classes_;
};

inline LabelEncoder encode_labels(std::span<const Label> y) { return LabelEncoder(y); }

// ---------------------------------------------------------------------------
// Resampling

struct FoldPlan {
  Index n = 0;
  Index k = 0;
  std::uint64_t seed = 0;
  std::vector<Index> assignments;

  std::vector<Index> test_indices(Index fold) const {
    std::vector<Index> out;
    for (Index i = 0; i < n; ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }

  std::vector<Index> train_indices(Index fold) const {
    std::vector<Index> out;
    for (Index i = 0; i < n; ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }

  std::vector<Index> fold_sizes() const {
    std::vector<Index> sizes(k, 0);
    for (Index a : assignments) ++sizes[a];
    return sizes;
  }
};

/// k-fold partition. With labels, each class is shuffled separately and dealt
/// round-robin with the dealing position carried across classes, so both the
/// per-class and the overall fold sizes differ by at most one.
inline FoldPlan kfold(Index n, Index k, std::uint64_t seed,
                      std::optional<std::span<const Label>> stratify_on = std::nullopt) {
  if (k < 2 || k > n)
    throw InvalidFoldCount("need 2 <= k <= n, got k=" + std::to_string(k) + " n=" + std::to_string(n));
  FoldPlan plan{n, k, seed, std::vector<Index>(n, 0)};
  Rng rng(seed);
  if (!stratify_on) {
    const auto order = rng.permutation(n);
    for (Index pos = 0; pos < n; ++pos) plan.assignments[order[pos]] = pos % k;
    return plan;
  }
  const auto& labels = *stratify_on;
  if (labels.size() != n) throw ShapeMismatch("stratification labels length != n");
  std::map<Label, std::vector<Index>> by_class;
  for (Index i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  Index dealt = 0;
  std::uint64_t stream = 0;
  for (auto& [label, members] : by_class) {
    Rng class_rng = rng.split(stream++);
    class_rng.shuffle(std::span<Index>(members));
    for (Index m : members) plan.assignments[m] = dealt++ % k;
  }
  return plan;
}

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Repeated random train/test splits. Train size is floor(fraction * n);
/// replicate r draws from its own child stream, and both index lists are sorted.
inline std::vector<Split> monte_carlo_split(Index n, double train_fraction, Index replicates,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidSplit("train fraction must lie in (0,1)");
  const auto n_train = static_cast<Index>(std::floor(train_fraction * double(n) + 1e-9));
  if (n_train == 0 || n_train >= n)
    throw InvalidSplit("fraction " + std::to_string(train_fraction) + " of n=" + std::to_string(n) +
                       " leaves an empty side");
  Rng root(seed);
  std::vector<Split> out;
  out.reserve(replicates);
  for (Index r = 0; r < replicates; ++r) {
    Rng rng = root.split(r);
    auto perm = rng.permutation(n);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
    s.test.assign(perm.begin() + std::ptrdiff_t(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error evaluation

inline double error_rate(std::span<const Label> y_true, std::span<const Label> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ShapeMismatch("label vectors differ in length: " + std::to_string(y_true.size()) +
                        " vs " + std::to_string(y_pred.size()));
  if (y_true.empty()) throw ShapeMismatch("empty label vectors");
  Index wrong = 0;
  for (Index i = 0; i < y_true.size(); ++i) wrong += y_true[i] != y_pred[i];
  return double(wrong) / double(y_true.size());
}

struct ConfusionMatrix {
  std::vector<Label> classes;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // (true, predicted)

  std::int64_t total() const { return counts.sum(); }
  std::int64_t trace() const { return counts.trace(); }
  double error_rate() const { return total() == 0 ? 0.0 : 1.0 - double(trace()) / double(total()); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes != classes) throw ShapeMismatch("confusion matrices over different classes");
    counts += other.counts;
    return *this;
  }
};

inline ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred,
                                 std::span<const Label> classes) {
  if (y_true.size() != y_pred.size()) throw ShapeMismatch("label vectors differ in length");
  ConfusionMatrix cm;
  cm.classes.assign(classes.begin(), classes.end());
  std::sort(cm.classes.begin(), cm.classes.end());
  const auto c = Eigen::Index(cm.classes.size());
  cm.counts = decltype(cm.counts)::Zero(c, c);
  auto pos = [&](Label l) {
    const auto it = std::lower_bound(cm.classes.begin(), cm.classes.end(), l);
    if (it == cm.classes.end() || *it != l)
      throw InvalidLabels("label " + std::to_string(l) + " not in class table");
    return Eigen::Index(it - cm.classes.begin());
  };
  for (Index i = 0; i < y_true.size(); ++i) ++cm.counts(pos(y_true[i]), pos(y_pred[i]));
  return cm;
}

inline double mean_squared_error(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size()) throw ShapeMismatch("target vectors differ in length");
  if (y_true.size() == 0) throw ShapeMismatch("empty target vectors");
  return (y_true - y_pred).squaredNorm() / double(y_true.size());
}

}  // namespace mlcore
