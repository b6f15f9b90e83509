#pragma once

// CART regression trees, bootstrap forests and least-squares gradient boosting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"
#include "heliocast/random.hpp"

namespace heliocast {

/// Flat tree node. Leaves have feature == -1; internal nodes route rows with
/// x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t input_dims = 0;

  static RegressionTree leaf(double value, std::size_t dims = 0) {
    return RegressionTree{{TreeNode{-1, 0.0, -1, -1, value}}, dims};
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  int depth() const {
    if (nodes.empty()) return 0;
    int best = 0;
    std::vector<std::pair<std::int32_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [idx, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes[static_cast<std::size_t>(idx)];
      if (!n.is_leaf()) {
        stack.push_back({n.left, d + 1});
        stack.push_back({n.right, d + 1});
      }
    }
    return best;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

inline double predict_tree(const RegressionTree& tree, std::span<const double> row) {
  require(!tree.nodes.empty(), "predict on an empty tree");
  if (tree.input_dims != 0 && row.size() != tree.input_dims)
    fail(ErrorCode::invalid_argument, "tree expects " + std::to_string(tree.input_dims) +
                                          " features, got " + std::to_string(row.size()));
  std::size_t idx = 0;
  while (true) {
    const auto& n = tree.nodes[idx];
    if (n.is_leaf()) return n.value;
    if (static_cast<std::size_t>(n.feature) >= row.size())
      fail(ErrorCode::invalid_argument, "row too short for tree feature index");
    idx = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold
                                       ? n.left
                                       : n.right);
  }
}

struct TreeConfig {
  std::optional<int> max_depth;  // unbounded when empty
  int min_samples_split = 2;
  // Every feature is examined at every split, so the seed does not change
  // the fitted tree; it is carried for configuration fidelity.
  std::uint64_t seed = 42;

  void validate() const {
    require(!max_depth || *max_depth >= 1, "max_depth must be >= 1");
    require(min_samples_split >= 2, "min_samples_split must be >= 2");
  }
};

struct SplitCandidate {
  double threshold = 0.0;
  double sse_reduction = 0.0;
};

namespace detail {

// Threshold strictly separating lo < hi with lo <= t < hi.
inline double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return (mid < hi) ? mid : lo;
}

// Scans a sequence already ordered by feature value. `value_at(k)` and
// `target_at(k)` read the k-th element. Returns the best boundary (number of
// elements on the left) and its SSE reduction.
template <typename ValueAt, typename TargetAt>
std::optional<std::pair<std::size_t, double>> scan_sorted(std::size_t m, ValueAt value_at,
                                                          TargetAt target_at) {
  if (m < 2) return std::nullopt;
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) total += target_at(k);
  double left_sum = 0.0;
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    left_sum += target_at(k);
    if (!(value_at(k) < value_at(k + 1))) continue;
    const double nl = double(k + 1);
    const double nr = double(m - k - 1);
    const double diff = left_sum / nl - (total - left_sum) / nr;
    const double reduction = nl * nr / double(m) * diff * diff;
    if (reduction > 0.0 && (!best || reduction > best->second)) best = {{k + 1, reduction}};
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, std::vector<std::size_t> rows,
              const TreeConfig& cfg)
      : x_(x), y_(y), rows_(std::move(rows)), cfg_(cfg) {}

  RegressionTree build() {
    const std::size_t d = x_.cols();
    std::vector<std::vector<std::uint32_t>> orders(d);
    for (std::size_t f = 0; f < d; ++f) {
      auto& order = orders[f];
      order.resize(rows_.size());
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = x_(rows_[a], f), vb = x_(rows_[b], f);
        return va < vb || (va == vb && a < b);
      });
    }
    nodes_.clear();
    grow(std::move(orders), 0);
    return RegressionTree{std::move(nodes_), d};
  }

 private:
  double target(std::uint32_t pos) const { return y_[rows_[pos]]; }

  std::int32_t grow(std::vector<std::vector<std::uint32_t>> orders, int depth) {
    const auto& any = orders.front();
    const std::size_t m = any.size();
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto pos : any) {
      const double v = target(pos);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const auto self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, sum / double(m)});

    const bool depth_exhausted = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (depth_exhausted || m < static_cast<std::size_t>(cfg_.min_samples_split) || lo == hi)
      return self;

    int best_feature = -1;
    std::size_t best_boundary = 0;
    double best_reduction = 0.0;
    for (std::size_t f = 0; f < orders.size(); ++f) {
      const auto& order = orders[f];
      auto found = scan_sorted(
          m, [&](std::size_t k) { return x_(rows_[order[k]], f); },
          [&](std::size_t k) { return target(order[k]); });
      if (found && found->second > best_reduction) {
        best_feature = static_cast<int>(f);
        best_boundary = found->first;
        best_reduction = found->second;
      }
    }
    if (best_feature < 0) return self;

    const auto f = static_cast<std::size_t>(best_feature);
    const auto& order = orders[f];
    const double threshold =
        midpoint(x_(rows_[order[best_boundary - 1]], f), x_(rows_[order[best_boundary]], f));

    std::vector<std::vector<std::uint32_t>> left(orders.size()), right(orders.size());
    for (std::size_t g = 0; g < orders.size(); ++g) {
      left[g].reserve(best_boundary);
      right[g].reserve(m - best_boundary);
      for (auto pos : orders[g]) {
        (x_(rows_[pos], f) <= threshold ? left[g] : right[g]).push_back(pos);
      }
    }
    orders.clear();
    orders.shrink_to_fit();

    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(self)];
    node.feature = best_feature;
    node.threshold = threshold;
    node.left = l;
    node.right = r;
    return self;
  }

  const Matrix& x_;
  std::span<const double> y_;
  std::vector<std::size_t> rows_;
  TreeConfig cfg_;
  std::vector<TreeNode> nodes_;
};

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace detail

/// Best SSE-reducing threshold for one feature column, or nothing when no
/// threshold strictly reduces the squared error.
inline std::optional<SplitCandidate> best_split(std::span<const double> feature,
                                                std::span<const double> targets) {
  require(feature.size() == targets.size(), "best_split: length mismatch");
  require(feature.size() >= 2, "best_split: need at least two samples");
  std::vector<std::size_t> order(feature.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return feature[a] < feature[b]; });
  const auto found = detail::scan_sorted(
      order.size(), [&](std::size_t k) { return feature[order[k]]; },
      [&](std::size_t k) { return targets[order[k]]; });
  if (!found) return std::nullopt;
  return SplitCandidate{
      detail::midpoint(feature[order[found->first - 1]], feature[order[found->first]]),
      found->second};
}

inline RegressionTree fit_tree(const Dataset& ds, const TreeConfig& cfg = {}) {
  ds.validate();
  cfg.validate();
  require(ds.size() >= 1, "fit_tree: empty dataset");
  return detail::TreeBuilder(ds.features, ds.target, detail::all_rows(ds.size()), cfg).build();
}

struct ForestConfig {
  std::size_t tree_count = 100;
  bool bootstrap = true;
  TreeConfig tree_config{};  // unbounded depth, min_samples_split 2
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::size_t tree_count = 0;
  bool bootstrap = true;
  std::uint64_t seed = 42;
};

/// Member t trains on n draws with replacement from Rng(seed + t), so trees
/// are independent of training order.
inline ForestModel fit_forest(const Dataset& ds, const ForestConfig& cfg = {}) {
  ds.validate();
  cfg.tree_config.validate();
  require(ds.size() >= 1, "fit_forest: empty dataset");
  require(cfg.tree_count >= 1, "fit_forest: tree_count must be >= 1");
  const std::size_t n = ds.size();

  ForestModel model;
  model.tree_count = cfg.tree_count;
  model.bootstrap = cfg.bootstrap;
  model.seed = cfg.seed;
  model.trees.resize(cfg.tree_count);

  auto train_one = [&](std::size_t t) {
    std::vector<std::size_t> rows;
    if (cfg.bootstrap) {
      Rng rng(cfg.seed + t);
      rows.resize(n);
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      rows = detail::all_rows(n);
    }
    model.trees[t] = detail::TreeBuilder(ds.features, ds.target, std::move(rows), cfg.tree_config)
                         .build();
  };

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.tree_count));
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t t = w; t < cfg.tree_count; t += workers) train_one(t);
    }));
  }
  for (auto& j : jobs) j.get();
  return model;
}

inline double predict_forest(const ForestModel& forest, std::span<const double> row) {
  require(!forest.trees.empty(), "predict on an empty forest");
  double s = 0.0;
  for (const auto& t : forest.trees) s += predict_tree(t, row);
  return s / double(forest.trees.size());
}

struct GbrConfig {
  std::size_t stage_count = 100;
  double learning_rate = 0.2;
  int max_depth = 5;
  int min_samples_split = 2;
  // No row or feature subsampling, so boosting is deterministic without it.
  std::uint64_t seed = 42;
};

struct GbrModel {
  double initial_value = 0.0;
  std::vector<RegressionTree> stages;
  double learning_rate = 0.2;
  std::size_t stage_count = 0;
  int max_depth = 5;
  std::uint64_t seed = 42;
  // Training MSE after each stage; entry 0 is the constant initial model.
  std::vector<double> train_mse;
};

/// Squared-error boosting: F0 = mean(y), F_m = F_{m-1} + lr * h_m where h_m
/// is a depth-bounded CART tree fitted to the current residuals.
inline GbrModel fit_gbr(const Dataset& ds, const GbrConfig& cfg = {}) {
  ds.validate();
  require(ds.size() >= 1, "fit_gbr: empty dataset");
  require(cfg.learning_rate >= 0.0, "fit_gbr: learning_rate must be non-negative");
  require(cfg.max_depth >= 1, "fit_gbr: max_depth must be >= 1");
  const std::size_t n = ds.size();

  GbrModel model;
  model.learning_rate = cfg.learning_rate;
  model.stage_count = cfg.stage_count;
  model.max_depth = cfg.max_depth;
  model.seed = cfg.seed;
  model.initial_value = std::accumulate(ds.target.begin(), ds.target.end(), 0.0) / double(n);

  std::vector<double> fitted(n, model.initial_value);
  std::vector<double> residual(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (ds.target[i] - fitted[i]) * (ds.target[i] - fitted[i]);
    return s / double(n);
  };
  model.train_mse.push_back(mse());

  TreeConfig tree_cfg{cfg.max_depth, cfg.min_samples_split, cfg.seed};
  const auto rows = detail::all_rows(n);
  for (std::size_t m = 0; m < cfg.stage_count; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = ds.target[i] - fitted[i];
    auto tree = detail::TreeBuilder(ds.features, residual, rows, tree_cfg).build();
    for (std::size_t i = 0; i < n; ++i)
      fitted[i] += cfg.learning_rate * predict_tree(tree, ds.features.row(i));
    model.stages.push_back(std::move(tree));
    model.train_mse.push_back(mse());
  }
  return model;
}

inline double predict_gbr(const GbrModel& model, std::span<const double> row) {
  double s = 0.0;
  for (const auto& t : model.stages) s += predict_tree(t, row);
  return model.initial_value + model.learning_rate * s;
}

}  // namespace heliocast
