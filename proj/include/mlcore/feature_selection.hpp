#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlcore/core.hpp"
#include "mlcore/discriminant.hpp"
#include "mlcore/kernels.hpp"
#include "mlcore/linear.hpp"

namespace mlcore {

/// order[0] is the most important feature; scores are indexed by feature.
struct FeatureRanking {
  std::vector<Index> order;
  std::optional<Vector> scores;

  void validate() const {
    std::vector<bool> seen(order.size(), false);
    for (Index f : order) {
      if (f >= order.size() || seen[f]) throw InvalidLists("feature ranking is not a permutation");
      seen[f] = true;
    }
  }
};

/// Features sorted by descending score; equal scores keep the lower index first.
inline FeatureRanking ranking_from_scores(const Vector& scores) {
  FeatureRanking r;
  r.order.resize(Index(scores.size()));
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](Index a, Index b) { return scores[Eigen::Index(a)] > scores[Eigen::Index(b)]; });
  r.scores = scores;
  return r;
}

using LinearTrainer = std::function<LinearModel(const LabeledDataset&)>;

namespace detail {

inline std::string subset_context(const char* who, Index round, const std::vector<Index>& features) {
  std::string s = std::string(who) + " round " + std::to_string(round) + " on features {";
  for (Index i = 0; i < features.size(); ++i) s += (i ? "," : "") + std::to_string(features[i]);
  return s + "}";
}

/// Shared elimination loop. `impact` returns one score per remaining feature;
/// the `step` lowest go first, ties dropping the higher original index first.
/// Scores record the impact at elimination time.
template <class Impact>
FeatureRanking eliminate(Index p, Index step, const char* who, Impact&& impact) {
  if (step < 1) throw InvalidParameter(std::string(who) + " step must be >= 1");
  std::vector<Index> remaining(p);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<Index> eliminated;
  Vector scores = Vector::Zero(Eigen::Index(p));
  Index round = 0;
  while (remaining.size() > 1) {
    Vector s;
    try {
      s = impact(remaining);
    } catch (const Error& e) {
      rethrow_with_context(e, subset_context(who, round, remaining));
    }
    std::vector<Index> pos(remaining.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(), [&](Index a, Index b) {
      const double sa = s[Eigen::Index(a)], sb = s[Eigen::Index(b)];
      return sa < sb || (sa == sb && remaining[a] > remaining[b]);
    });
    const Index drop = std::min(step, remaining.size() - 1);
    std::vector<bool> gone(remaining.size(), false);
    for (Index r = 0; r < drop; ++r) {
      eliminated.push_back(remaining[pos[r]]);
      scores[Eigen::Index(remaining[pos[r]])] = s[Eigen::Index(pos[r])];
      gone[pos[r]] = true;
    }
    std::vector<Index> next;
    for (Index i = 0; i < remaining.size(); ++i)
      if (!gone[i]) next.push_back(remaining[i]);
    remaining = std::move(next);
    ++round;
  }
  if (!remaining.empty()) {
    eliminated.push_back(remaining.front());
    scores[Eigen::Index(remaining.front())] = std::numeric_limits<double>::infinity();
  }
  FeatureRanking r{{eliminated.rbegin(), eliminated.rend()}, scores};
  r.validate();
  return r;
}

}  // namespace detail

/// Recursive feature elimination on squared linear weights, refitting from
/// scratch every round.
inline FeatureRanking rfe(const LinearTrainer& trainer, const LabeledDataset& d, Index step = 1) {
  return detail::eliminate(d.x.cols(), step, "rfe", [&](const std::vector<Index>& features) {
    const LinearModel m = trainer(d.with_features(features));
    if (m.features() != features.size()) throw ShapeMismatch("trainer returned a model of the wrong width");
    return Vector(m.weights.array().square());
  });
}

using GramBuilder = std::function<GramMatrix(const SampleMatrix&)>;

/// KFDA-RFE: dual coefficients are fitted on the current subset, and each
/// feature is scored by how much the Rayleigh quotient of those fixed
/// coefficients drops when the Gram matrix is rebuilt without it.
inline FeatureRanking kfda_rfe(const GramBuilder& build, const LabeledDataset& d, std::optional<double> reg = {},
                               Index step = 1) {
  const auto labels = d.labels();
  if (!LabelEncoder(labels).binary()) throw InvalidLabels("kfda_rfe is binary-only");
  return detail::eliminate(d.x.cols(), step, "kfda_rfe", [&](const std::vector<Index>& features) {
    const GramMatrix K = build(d.x.select_cols(features));
    const KfdaModel m = kfda_fit(K, labels, reg);
    const double full = kfda_rayleigh_quotient(K, labels, m.dual_coefs, m.reg);
    Vector impact(Eigen::Index(features.size()));
    for (Index j = 0; j < features.size(); ++j) {
      std::vector<Index> rest;
      for (Index i = 0; i < features.size(); ++i)
        if (i != j) rest.push_back(features[i]);
      const GramMatrix Kj = build(d.x.select_cols(rest));
      impact[Eigen::Index(j)] = full - kfda_rayleigh_quotient(Kj, labels, m.dual_coefs, m.reg);
    }
    return impact;
  });
}

inline FeatureRanking kfda_rfe(const KernelSpec& kernel, const LabeledDataset& d, std::optional<double> reg = {},
                               Index step = 1) {
  kernel.validate();
  return kfda_rfe([&](const SampleMatrix& X) { return gram(kernel, X); }, d, reg, step);
}

// ---- I-Relief ----

struct IReliefOptions {
  double sigma = 1.0;
  Index max_iter = 100;
  double tol = 1e-6;
};

struct IReliefResult {
  Vector weights;
  Index iterations = 0;
  bool converged = false;
};

namespace detail {

/// log sum_i exp(v_i) over a subset.
inline double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Iterative Relief with weighted L1 distances and kernel exp(-d / sigma).
/// Probabilities are formed in the log domain, so wide distance ranges do not
/// underflow. A non-converged run returns its last iterate with the flag off.
inline IReliefResult irelief(const LabeledDataset& d, const IReliefOptions& o = {}) {
  if (!(o.sigma > 0.0)) throw InvalidParameter("irelief sigma must be > 0");
  if (o.max_iter < 1) throw InvalidParameter("irelief max_iter must be >= 1");
  const auto labels = d.labels();
  const LabelEncoder enc(labels);
  if (!enc.binary()) throw InvalidLabels("irelief is binary-only");
  const Index n = d.size(), p = d.x.cols();
  const RowMatrix& X = d.x.values();
  IReliefResult res;
  res.weights = Vector::Constant(Eigen::Index(p), 1.0 / std::sqrt(double(p)));

  for (res.iterations = 1; res.iterations <= o.max_iter; ++res.iterations) {
    const Vector& w = res.weights;
    Vector nu = Vector::Zero(Eigen::Index(p));
    for (Index a = 0; a < n; ++a) {
      std::vector<Index> hits, misses;
      std::vector<double> lh, lm;
      for (Index b = 0; b < n; ++b) {
        if (b == a) continue;
        const double dist = (X.row(Eigen::Index(a)) - X.row(Eigen::Index(b))).cwiseAbs().dot(w.transpose());
        if (labels[b] == labels[a]) {
          hits.push_back(b);
          lh.push_back(-dist / o.sigma);
        } else {
          misses.push_back(b);
          lm.push_back(-dist / o.sigma);
        }
      }
      if (hits.empty() || misses.empty()) continue;  // outlier probability 1
      const double zh = detail::log_sum_exp(lh), zm = detail::log_sum_exp(lm);
      const double outlier = 1.0 / (1.0 + std::exp(zh - zm));
      const double gamma = 1.0 - outlier;
      Vector mbar = Vector::Zero(Eigen::Index(p)), hbar = Vector::Zero(Eigen::Index(p));
      for (Index i = 0; i < misses.size(); ++i)
        mbar += std::exp(lm[i] - zm) * (X.row(Eigen::Index(a)) - X.row(Eigen::Index(misses[i]))).cwiseAbs().transpose();
      for (Index i = 0; i < hits.size(); ++i)
        hbar += std::exp(lh[i] - zh) * (X.row(Eigen::Index(a)) - X.row(Eigen::Index(hits[i]))).cwiseAbs().transpose();
      nu += gamma * (mbar - hbar);
    }
    nu /= double(n);
    Vector next = nu.cwiseMax(0.0);
    const double norm = next.norm();
    if (norm > 0.0) next /= norm;
    else next = Vector::Constant(Eigen::Index(p), 1.0 / std::sqrt(double(p)));
    const double change = (next - res.weights).norm();
    res.weights = next;
    if (change < o.tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) res.iterations = o.max_iter;
  return res;
}

// ---- Canberra stability ----

/// Lists are feature orders (position 0 = best). A list shorter than the
/// universe is a top-k prefix; every feature it omits takes rank k + 1.
struct RankedListSet {
  Index universe = 0;
  std::vector<std::vector<Index>> lists;

  Index length() const { return lists.empty() ? 0 : lists.front().size(); }

  void validate() const {
    if (lists.size() < 2) throw InvalidLists("stability needs at least 2 lists");
    if (universe < 1) throw InvalidLists("empty feature universe");
    for (const auto& l : lists) {
      if (l.size() != length()) throw InvalidLists("lists have different lengths");
      if (l.empty() || l.size() > universe) throw InvalidLists("list length outside [1, universe]");
      std::vector<bool> seen(universe, false);
      for (Index f : l) {
        if (f >= universe) throw InvalidLists("feature " + std::to_string(f) + " outside the universe");
        if (seen[f]) throw InvalidLists("feature " + std::to_string(f) + " repeated in a list");
        seen[f] = true;
      }
    }
  }
};

/// 1-based rank vector of an order, truncated so ranks beyond k become k + 1.
inline std::vector<double> truncated_ranks(const std::vector<Index>& order, Index universe, Index k) {
  std::vector<double> r(universe, double(k + 1));
  for (Index pos = 0; pos < order.size() && pos < k; ++pos) r[order[pos]] = double(pos + 1);
  return r;
}

inline double canberra_distance(std::span<const double> r, std::span<const double> s) {
  if (r.size() != s.size()) throw InvalidLists("rank vectors differ in length");
  double d = 0.0;
  for (Index j = 0; j < r.size(); ++j)
    if (r[j] + s[j] != 0.0) d += std::abs(r[j] - s[j]) / (r[j] + s[j]);
  return d;
}

/// Exact expected distance between two independent uniform permutations of
/// length p under truncation at k: ranks at one position are independent and
/// uniform, so E = (1/p) sum_{a,b} |a'-b'|/(a'+b') with a' = min(a, k+1).
inline double canberra_expectation(Index p, Index k) {
  double s = 0.0;
  for (Index a = 1; a <= p; ++a)
    for (Index b = 1; b <= p; ++b) {
      const double x = double(std::min(a, k + 1)), y = double(std::min(b, k + 1));
      s += std::abs(x - y) / (x + y);
    }
  return s / double(p);
}

struct StabilityResult {
  double indicator = 0.0;      // mean distance / expected distance
  double mean_distance = 0.0;  // over unordered pairs
  double expected = 0.0;
  Index top_k = 0;
  Index pairs = 0;
  std::string normalization = "exact";
};

inline StabilityResult canberra_stability(const RankedListSet& set, std::optional<Index> top_k = {}) {
  set.validate();
  const Index p = set.universe;
  const Index k = top_k.value_or(set.length());
  if (k < 1 || k > set.length())
    throw InvalidParameter("top_k must be in [1, " + std::to_string(set.length()) + "], got " + std::to_string(k));
  std::vector<std::vector<double>> ranks;
  for (const auto& l : set.lists) ranks.push_back(truncated_ranks(l, p, k));
  StabilityResult res;
  res.top_k = k;
  double total = 0.0;
  for (Index a = 0; a < ranks.size(); ++a)
    for (Index b = a + 1; b < ranks.size(); ++b, ++res.pairs) total += canberra_distance(ranks[a], ranks[b]);
  res.mean_distance = total / double(res.pairs);
  res.expected = canberra_expectation(p, k);
  res.indicator = res.expected > 0.0 ? res.mean_distance / res.expected : 0.0;
  return res;
}

}  // namespace mlcore
