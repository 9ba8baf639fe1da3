#pragma once

// Multiclass gradient-boosted regression trees with a softmax / logloss
// objective.
//
// Each round computes p = softmax(scores) once, then for every class k fits
// one tree to g_ik = y_ik - p_ik with Newton leaves
//
//     leaf = sum(g) / (sum(h) + l2_leaf_reg),   h_ik = p_ik (1 - p_ik)
//
// and adds learning_rate * leaf to the class-k score. Scores start at the log
// class priors. Trees grow level by level with an exact greedy scan over the
// presorted values of every feature, maximizing the reduction in squared error
// of the gradients. Among equal gains the lowest feature index wins, then the
// lowest threshold, so the fitted model does not depend on the thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cmqe/corpus.hpp"
#include "cmqe/error.hpp"
#include "cmqe/feature_matrix.hpp"

namespace cmqe {

struct TrainConfig {
  std::uint32_t iterations = 200;
  double learning_rate = 0.1;
  std::uint32_t max_depth = 4;
  std::uint32_t min_samples_leaf = 5;
  double l2_leaf_reg = 1.0;
  std::int64_t seed = 42;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0 && c.learning_rate <= 1.0)) throw UsageError("learning_rate must be in (0, 1]");
  if (c.max_depth == 0) throw UsageError("max_depth must be positive");
  if (c.min_samples_leaf == 0) throw UsageError("min_samples_leaf must be positive");
  if (!(c.l2_leaf_reg >= 0.0) || !std::isfinite(c.l2_leaf_reg)) {
    throw UsageError("l2_leaf_reg must be a finite non-negative number");
  }
}

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with x[feature] <= threshold go left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;  // leaf value, before the learning rate

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() : nodes_(1) {}
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  std::uint32_t leaf_index(std::span<const double> x) const noexcept {
    std::uint32_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
  }

  double predict(std::span<const double> x) const noexcept { return nodes_[leaf_index(x)].value; }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      deepest = std::max(deepest, d[i]);
      if (!nodes_[i].is_leaf()) d[nodes_[i].left] = d[nodes_[i].right] = d[i] + 1;
    }
    return deepest;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct BoostedEnsemble {
  std::vector<Label> class_labels;
  std::vector<double> base_scores;
  // Round-major: trees[round * K + class].
  std::vector<RegressionTree> trees;
  std::size_t feature_dim = 0;
  std::array<std::size_t, 3> segment_dims{};
  TrainConfig config;

  std::size_t num_classes() const noexcept { return class_labels.size(); }
  std::size_t rounds() const noexcept { return class_labels.empty() ? 0 : trees.size() / class_labels.size(); }

  friend bool operator==(const BoostedEnsemble&, const BoostedEnsemble&) = default;
};

// Row indices ordered by value, per feature (ties by row index).
class SortedFeatures {
 public:
  explicit SortedFeatures(const FeatureMatrix& x) : rows_(x.rows()), order_(x.rows() * x.cols()) {
    for (std::size_t f = 0; f < x.cols(); ++f) {
      auto col = std::span<std::uint32_t>(order_).subspan(f * rows_, rows_);
      std::iota(col.begin(), col.end(), 0u);
      std::stable_sort(col.begin(), col.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
  }

  std::span<const std::uint32_t> column(std::size_t f) const noexcept {
    return std::span<const std::uint32_t>(order_).subspan(f * rows_, rows_);
  }

 private:
  std::size_t rows_;
  std::vector<std::uint32_t> order_;
};

struct TreeParams {
  std::uint32_t max_depth = 4;
  std::uint32_t min_samples_leaf = 5;
  double l2_leaf_reg = 1.0;
  unsigned threads = 1;
};

namespace detail {

// Gains below this are rounding noise on constant gradients.
inline constexpr double kMinSplitGain = 1e-12;

struct SplitCandidate {
  double gain = kMinSplitGain;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

// A threshold t with lo <= t < hi.
inline double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) * 0.5;
  return (mid < hi && mid >= lo) ? mid : lo;
}

inline unsigned resolve_threads(unsigned requested, std::size_t work_items) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(t, work_items)));
}

}  // namespace detail

// Fits one regression tree to (grad, hess). On return leaf_of[i] is the leaf
// node holding row i.
inline RegressionTree build_tree(const FeatureMatrix& x, const SortedFeatures& sorted,
                                 std::span<const double> grad, std::span<const double> hess,
                                 const TreeParams& params, std::span<std::uint32_t> leaf_of) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double min_leaf = params.min_samples_leaf;
  std::vector<TreeNode> nodes(1);
  std::fill(leaf_of.begin(), leaf_of.end(), 0u);

  std::vector<std::uint32_t> frontier{0};
  for (std::uint32_t depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    const std::size_t slots = frontier.size();
    std::vector<std::int32_t> slot_of(nodes.size(), -1);
    for (std::size_t s = 0; s < slots; ++s) slot_of[frontier[s]] = static_cast<std::int32_t>(s);

    std::vector<double> count(slots, 0.0), sum(slots, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot_of[leaf_of[i]];
      if (s < 0) continue;
      count[s] += 1.0;
      sum[s] += grad[i];
    }
    std::vector<char> splittable(slots, 0);
    bool any = false;
    for (std::size_t s = 0; s < slots; ++s) {
      splittable[s] = count[s] >= 2 * min_leaf;
      any = any || splittable[s];
    }
    if (!any) break;

    const unsigned workers = detail::resolve_threads(params.threads, d);
    std::vector<std::vector<detail::SplitCandidate>> best(workers, std::vector<detail::SplitCandidate>(slots));
    const auto scan = [&](unsigned w) {
      const std::size_t f_begin = d * w / workers;
      const std::size_t f_end = d * (w + 1) / workers;
      auto& local = best[w];
      std::vector<double> lcount(slots), lsum(slots), last(slots);
      for (std::size_t f = f_begin; f < f_end; ++f) {
        std::fill(lcount.begin(), lcount.end(), 0.0);
        std::fill(lsum.begin(), lsum.end(), 0.0);
        for (const std::uint32_t i : sorted.column(f)) {
          const auto s = slot_of[leaf_of[i]];
          if (s < 0 || !splittable[s]) continue;
          const double v = x(i, f);
          const double lc = lcount[s];
          if (lc >= min_leaf && v > last[s] && count[s] - lc >= min_leaf) {
            const double rc = count[s] - lc;
            const double rs = sum[s] - lsum[s];
            const double gain = lsum[s] * lsum[s] / lc + rs * rs / rc - sum[s] * sum[s] / count[s];
            if (gain > local[s].gain) {
              local[s] = {gain, static_cast<std::int32_t>(f), detail::midpoint(last[s], v)};
            }
          }
          lcount[s] = lc + 1.0;
          lsum[s] += grad[i];
          last[s] = v;
        }
      }
    };
    if (workers == 1) {
      scan(0);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(scan, w);
    }

    std::vector<std::uint32_t> next;
    std::vector<std::int32_t> split_left(slots, -1);
    for (std::size_t s = 0; s < slots; ++s) {
      detail::SplitCandidate chosen;
      for (unsigned w = 0; w < workers; ++w) {
        if (best[w][s].gain > chosen.gain) chosen = best[w][s];
      }
      if (chosen.feature < 0) continue;
      const std::uint32_t node = frontier[s];
      const auto left = static_cast<std::uint32_t>(nodes.size());
      nodes[node].feature = chosen.feature;
      nodes[node].threshold = chosen.threshold;
      nodes[node].left = left;
      nodes[node].right = left + 1;
      nodes.emplace_back();
      nodes.emplace_back();
      split_left[s] = static_cast<std::int32_t>(left);
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = slot_of[leaf_of[i]];
      if (s < 0 || split_left[s] < 0) continue;
      const auto& node = nodes[leaf_of[i]];
      leaf_of[i] = x(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
    }
    frontier = std::move(next);
  }

  std::vector<double> g_sum(nodes.size(), 0.0), h_sum(nodes.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g_sum[leaf_of[i]] += grad[i];
    h_sum[leaf_of[i]] += hess[i];
  }
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (!nodes[j].is_leaf()) continue;
    const double denom = h_sum[j] + params.l2_leaf_reg;
    nodes[j].value = denom > 0.0 ? g_sum[j] / denom : 0.0;
  }
  return RegressionTree(std::move(nodes));
}

// In-place softmax; every output is clamped to at least the smallest normal
// double so that log() stays finite.
inline void softmax_inplace(std::span<double> scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    total += s;
  }
  for (double& s : scores) s = std::max(s / total, std::numeric_limits<double>::min());
}

// Accumulated per-class scores (log-odds scale) for one row.
inline std::vector<double> raw_scores(const BoostedEnsemble& model, std::span<const double> x) {
  if (x.size() != model.feature_dim) {
    throw DataError("feature dim mismatch: model expects " + std::to_string(model.feature_dim) + ", got " +
                    std::to_string(x.size()));
  }
  const std::size_t k_count = model.num_classes();
  std::vector<double> scores = model.base_scores;
  const double lr = model.config.learning_rate;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    scores[t % k_count] += lr * model.trees[t].predict(x);
  }
  return scores;
}

inline std::vector<double> predict_proba(const BoostedEnsemble& model, std::span<const double> x) {
  auto p = raw_scores(model, x);
  softmax_inplace(p);
  return p;
}

// Index of the largest entry; the lowest index wins ties.
inline std::size_t argmax_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

inline Label predict_class(const BoostedEnsemble& model, std::span<const double> x) {
  const auto p = predict_proba(model, x);
  return model.class_labels[argmax_index(p)];
}

struct IterationLog {
  std::uint32_t iteration = 0;  // 0 is the prior-only model
  double train_logloss = 0.0;
};

struct FitOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  std::function<void(const IterationLog&)> on_iteration;
};

// Mean negative log-likelihood of the true classes.
inline double mean_logloss(std::span<const double> probs, std::span<const std::uint32_t> targets,
                           std::size_t k_count) {
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) total -= std::log(probs[i * k_count + targets[i]]);
  return total / static_cast<double>(targets.size());
}

inline BoostedEnsemble fit(const FeatureMatrix& x, std::span<const Label> labels, const TrainConfig& config,
                           const FitOptions& options = {}) {
  validate(config);
  const std::size_t n = x.rows();
  if (n != labels.size()) {
    throw DataError("feature rows (" + std::to_string(n) + ") and labels (" + std::to_string(labels.size()) +
                    ") differ in length");
  }
  if (n == 0 || x.cols() == 0) throw DataError("cannot fit on an empty feature matrix");
  if (!x.all_finite()) throw DataError("feature matrix contains NaN or infinite values");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw DataError("too many rows");

  BoostedEnsemble model;
  model.class_labels = class_vocabulary(labels);
  model.feature_dim = x.cols();
  model.segment_dims = x.segment_dims();
  model.config = config;
  const std::size_t k_count = model.num_classes();
  if (k_count < 2) throw DataError("training labels contain a single class; at least two are required");

  std::vector<std::uint32_t> target(n);
  std::vector<double> class_count(k_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(model.class_labels.begin(), model.class_labels.end(), labels[i]);
    target[i] = static_cast<std::uint32_t>(it - model.class_labels.begin());
    class_count[target[i]] += 1.0;
  }
  model.base_scores.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) model.base_scores[k] = std::log(class_count[k] / static_cast<double>(n));

  std::vector<double> scores(n * k_count);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(model.base_scores.begin(), model.base_scores.end(), scores.begin() + i * k_count);
  }
  std::vector<double> probs(scores.size());
  const auto refresh_probs = [&] {
    probs = scores;
    for (std::size_t i = 0; i < n; ++i) softmax_inplace(std::span<double>(probs).subspan(i * k_count, k_count));
  };
  refresh_probs();
  if (options.on_iteration) options.on_iteration({0, mean_logloss(probs, target, k_count)});
  if (config.iterations == 0) return model;

  const SortedFeatures sorted(x);
  const TreeParams params{config.max_depth, config.min_samples_leaf, config.l2_leaf_reg, options.threads};
  model.trees.reserve(static_cast<std::size_t>(config.iterations) * k_count);
  std::vector<double> grad(n), hess(n);
  std::vector<std::uint32_t> leaf_of(n);
  std::vector<double> delta(n * k_count);

  for (std::uint32_t round = 1; round <= config.iterations; ++round) {
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[i * k_count + k];
        grad[i] = (target[i] == k ? 1.0 : 0.0) - p;
        hess[i] = p * (1.0 - p);
      }
      auto tree = build_tree(x, sorted, grad, hess, params, leaf_of);
      for (std::size_t i = 0; i < n; ++i) delta[i * k_count + k] = tree.nodes()[leaf_of[i]].value;
      model.trees.push_back(std::move(tree));
    }
    for (std::size_t j = 0; j < scores.size(); ++j) scores[j] += config.learning_rate * delta[j];
    refresh_probs();
    if (options.on_iteration) options.on_iteration({round, mean_logloss(probs, target, k_count)});
  }
  return model;
}

}  // namespace cmqe
