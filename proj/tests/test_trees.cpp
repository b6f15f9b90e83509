#include <gtest/gtest.h>

#include "heliocast/trees.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace heliocast;
using testsupport::make_dataset;

namespace {

using V = std::vector<double>;

double tree_sse(const RegressionTree& t, const Dataset& ds) {
  double s = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double e = ds.target[i] - predict_tree(t, ds.features.row(i));
    s += e * e;
  }
  return s;
}

Dataset step_data() { return make_dataset({{0}, {1}, {2}, {3}}, {0, 0, 10, 10}); }

// Best single split by trying every boundary of the sorted sample.
std::pair<double, double> brute_best_split(V x, V y) {
  std::vector<std::size_t> o(x.size());
  std::iota(o.begin(), o.end(), std::size_t{0});
  std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  V ys;
  for (auto i : o) ys.push_back(y[i]);
  const double parent = double(oracle::sse(ys, 0, ys.size()));
  double best = 0, thr = NAN;
  for (std::size_t b = 1; b < ys.size(); ++b) {
    if (!(x[o[b - 1]] < x[o[b]])) continue;
    const double red = parent - double(oracle::sse(ys, 0, b) + oracle::sse(ys, b, ys.size()));
    if (red > best + 1e-12) {
      best = red;
      thr = 0.5 * (x[o[b - 1]] + x[o[b]]);
    }
  }
  return {thr, best};
}

}  // namespace

TEST(BestSplit, StepExample) {
  const auto s = best_split(V{0, 1, 2, 3}, V{0, 0, 10, 10});
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
  EXPECT_DOUBLE_EQ(s->sse_reduction, 100.0);
}

TEST(BestSplit, NoCandidate) {
  EXPECT_FALSE(best_split(V{0, 1, 2}, V{4, 4, 4}));
  EXPECT_FALSE(best_split(V{2, 2, 2}, V{1, 2, 3}));
}

TEST(BestSplit, TieTakesSmallerThreshold) {
  // Splitting at 0.5 or 2.5 reduces SSE equally.
  const auto s = best_split(V{0, 1, 2, 3}, V{0, 5, 5, 10});
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 0.5);
}

TEST(BestSplit, MatchesEnumerationProperty) {
  Rng rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    V x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(double(rng.below(8)));
      y.push_back(rng.uniform(-5, 5));
    }
    const auto got = best_split(x, y);
    const auto [thr, red] = brute_best_split(x, y);
    if (!got) {
      EXPECT_TRUE(std::isnan(thr));
      continue;
    }
    EXPECT_NEAR(got->sse_reduction, red, 1e-9);
  }
}

TEST(FitTree, ConstantTargetIsLeaf) {
  const auto t = fit_tree(make_dataset({{0}, {1}, {2}}, {7, 7, 7}));
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(predict_tree(t, V{5}), 7.0);
}

TEST(FitTree, StepExampleAndBoundary) {
  TreeConfig cfg;
  cfg.max_depth = 1;
  const auto t = fit_tree(step_data(), cfg);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_EQ(t.nodes[0].threshold, 1.5);
  EXPECT_EQ(predict_tree(t, V{1.0}), 0.0);
  EXPECT_EQ(predict_tree(t, V{2.0}), 10.0);
  EXPECT_EQ(predict_tree(t, V{1.5}), 0.0);
}

TEST(FitTree, LeafAndErrors) {
  EXPECT_EQ(predict_tree(RegressionTree::leaf(7), V{1, 2, 3}), 7.0);
  EXPECT_THROW(fit_tree(Dataset{}), Error);
  const auto t = fit_tree(step_data());
  EXPECT_THROW(predict_tree(t, V{1, 2}), Error);
  TreeConfig bad;
  bad.max_depth = 0;
  EXPECT_THROW(fit_tree(step_data(), bad), Error);
}

TEST(FitTree, FeatureTieTakesLowerIndex) {
  const auto t = fit_tree(make_dataset({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {0, 0, 10, 10}));
  EXPECT_EQ(t.nodes[0].feature, 0);
}

TEST(FitTree, DepthBoundProperty) {
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 2 + rng.below(200), 1 + rng.below(3));
    TreeConfig cfg;
    cfg.max_depth = 3;
    const auto t = fit_tree(ds, cfg);
    EXPECT_LE(t.leaf_count(), 8u);
    EXPECT_LE(t.depth(), 3);
  }
}

TEST(FitTree, MinSamplesSplit) {
  TreeConfig cfg;
  cfg.min_samples_split = 5;
  EXPECT_EQ(fit_tree(step_data(), cfg).nodes.size(), 1u);
}

TEST(FitTree, FullDepthInterpolatesDistinctRows) {
  Rng rng(63);
  const auto ds = testsupport::random_dataset(rng, 100, 2);
  EXPECT_LT(tree_sse(fit_tree(ds), ds), 1e-20);
}

TEST(FitTree, EachSplitIsLocallyOptimalProperty) {
  // The root split must equal the best single split on any one feature.
  Rng rng(64);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const auto ds = testsupport::random_dataset(rng, n, 1, 4);
    TreeConfig cfg;
    cfg.max_depth = 1;
    const auto t = fit_tree(ds, cfg);
    const auto [thr, red] = brute_best_split(ds.features.column(0), ds.target);
    if (std::isnan(thr)) {
      EXPECT_EQ(t.nodes.size(), 1u);
    } else {
      const double parent = double(oracle::sse(ds.target, 0, n));
      EXPECT_NEAR(parent - tree_sse(t, ds), red, 1e-9);
    }
  }
}

TEST(FitTree, PiecewiseConstantProperty) {
  Rng rng(65);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 30, 2);
    TreeConfig cfg;
    cfg.max_depth = 3;
    const auto t = fit_tree(ds, cfg);
    for (int q = 0; q < 20; ++q) {
      auto row = testsupport::random_vector(rng, 2);
      const double base = predict_tree(t, row);
      // Nudge toward the nearest threshold on feature 0 without crossing it.
      double nearest = INFINITY;
      for (const auto& n : t.nodes)
        if (!n.is_leaf() && n.feature == 0) nearest = std::min(nearest, std::abs(n.threshold - row[0]));
      const double step = std::isinf(nearest) ? 0.5 : nearest * 0.5;
      bool crossing = false;
      for (const auto& n : t.nodes)
        if (!n.is_leaf() && n.feature == 0 && row[0] <= n.threshold && row[0] + step > n.threshold)
          crossing = true;
      if (crossing) continue;
      row[0] += step;
      EXPECT_EQ(predict_tree(t, row), base);
    }
  }
}

TEST(Forest, MeanOfMembers) {
  ForestModel f;
  f.trees = {RegressionTree::leaf(1), RegressionTree::leaf(2), RegressionTree::leaf(3)};
  EXPECT_EQ(predict_forest(f, V{0}), 2.0);
  f.trees = {RegressionTree::leaf(4), RegressionTree::leaf(6)};
  EXPECT_EQ(predict_forest(f, V{0}), 5.0);
  f.trees = {RegressionTree::leaf(9)};
  EXPECT_EQ(predict_forest(f, V{0}), 9.0);
  EXPECT_THROW(predict_forest(ForestModel{}, V{0}), Error);
}

TEST(Forest, DegenerateEqualsTreeProperty) {
  Rng rng(66);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 5 + rng.below(80), 1 + rng.below(3), 5);
    ForestConfig cfg;
    cfg.tree_count = 1;
    cfg.bootstrap = false;
    cfg.tree_config.max_depth = 1 + int(rng.below(4));
    const auto forest = fit_forest(ds, cfg);
    const auto tree = fit_tree(ds, cfg.tree_config);
    EXPECT_EQ(forest.trees.front(), tree);
  }
}

TEST(Forest, DeterministicAndBounded) {
  Rng rng(67);
  const auto ds = testsupport::random_dataset(rng, 120, 2);
  ForestConfig cfg;
  cfg.tree_count = 20;
  cfg.threads = 4;
  const auto a = fit_forest(ds, cfg);
  cfg.threads = 1;
  const auto b = fit_forest(ds, cfg);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(a.trees.size(), 20u);
  for (int q = 0; q < 50; ++q) {
    const auto row = testsupport::random_vector(rng, 2);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& t : a.trees) {
      lo = std::min(lo, predict_tree(t, row));
      hi = std::max(hi, predict_tree(t, row));
    }
    const double p = predict_forest(a, row);
    EXPECT_GE(p, lo);
    EXPECT_LE(p, hi);
  }
  cfg.seed = 43;
  EXPECT_NE(fit_forest(ds, cfg).trees, a.trees);
}

TEST(Gbr, InitialValueAndStubs) {
  const auto ds = make_dataset({{0}, {1}, {2}}, {1, 2, 6});
  GbrConfig cfg;
  cfg.stage_count = 0;
  const auto m = fit_gbr(ds, cfg);
  EXPECT_EQ(m.initial_value, 3.0);
  EXPECT_EQ(predict_gbr(m, V{0}), 3.0);
  EXPECT_EQ(m.train_mse.size(), 1u);
  cfg.stage_count = 5;
  cfg.learning_rate = 0.0;
  EXPECT_EQ(predict_gbr(fit_gbr(ds, cfg), V{2}), 3.0);
}

TEST(Gbr, OneStageExactFit) {
  GbrConfig cfg{1, 1.0, 1, 2, 42};
  const auto m = fit_gbr(make_dataset({{0}, {1}}, {0, 10}), cfg);
  EXPECT_EQ(m.stages.size(), 1u);
  EXPECT_EQ(m.train_mse.back(), 0.0);
  EXPECT_EQ(predict_gbr(m, V{0}), 0.0);
  EXPECT_EQ(predict_gbr(m, V{1}), 10.0);
}

TEST(Gbr, MonotoneTrainingErrorProperty) {
  Rng rng(68);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 10 + rng.below(100), 1 + rng.below(2));
    GbrConfig cfg;
    cfg.stage_count = 40;
    cfg.learning_rate = rng.uniform(0.05, 1.0);
    cfg.max_depth = 1 + int(rng.below(4));
    const auto m = fit_gbr(ds, cfg);
    ASSERT_EQ(m.train_mse.size(), 41u);
    for (std::size_t s = 1; s < m.train_mse.size(); ++s)
      EXPECT_LE(m.train_mse[s], m.train_mse[s - 1]) << "stage " << s;
  }
}

TEST(Gbr, PredictMatchesTrainingPath) {
  Rng rng(69);
  const auto ds = testsupport::random_dataset(rng, 80, 2);
  const auto m = fit_gbr(ds, GbrConfig{30, 0.2, 3, 2, 42});
  double s = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double e = ds.target[i] - predict_gbr(m, ds.features.row(i));
    s += e * e;
  }
  EXPECT_NEAR(s / double(ds.size()), m.train_mse.back(), 1e-9);
}
