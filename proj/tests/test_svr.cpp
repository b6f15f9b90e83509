#include <gtest/gtest.h>

#include "heliocast/linear_models.hpp"
#include "heliocast/svr.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace heliocast;
using testsupport::make_dataset;

namespace {

using V = std::vector<double>;

// Kernel matrix written out directly from the kernel definitions.
oracle::Rows gram_of(const Dataset& ds, const KernelSpec& k) {
  oracle::Rows g(ds.size(), V(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j) {
      double dot = 0, sq = 0;
      for (std::size_t c = 0; c < ds.dims(); ++c) {
        dot += ds.features(i, c) * ds.features(j, c);
        sq += (ds.features(i, c) - ds.features(j, c)) * (ds.features(i, c) - ds.features(j, c));
      }
      switch (k.kind) {
        case KernelKind::linear: g[i][j] = dot; break;
        case KernelKind::polynomial: {
          double p = 1, base = k.gamma * dot + k.coef0;
          for (int e = 0; e < k.degree; ++e) p *= base;
          g[i][j] = p;
          break;
        }
        case KernelKind::rbf: g[i][j] = std::exp(-k.gamma * sq); break;
      }
    }
  return g;
}

Dataset line_data(std::size_t n, double lo, double hi, double a, double b) {
  std::vector<std::vector<double>> rows;
  V y;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * double(i) / double(n - 1);
    rows.push_back({x});
    y.push_back(a + b * x);
  }
  return make_dataset(rows, y);
}

SvrConfig linear_cfg(double C, double eps) {
  SvrConfig cfg;
  cfg.C = C;
  cfg.epsilon = eps;
  return cfg;
}

}  // namespace

TEST(Kernel, Examples) {
  EXPECT_EQ(kernel_eval(V{1, 2}, V{3, 4}, KernelSpec{KernelKind::linear}), 11.0);
  EXPECT_EQ(kernel_eval(V{1, 1}, V{1, 1}, KernelSpec{KernelKind::polynomial, 1.0, 0.0, 3}), 8.0);
  EXPECT_EQ(kernel_eval(V{1, 2}, V{1, 2}, KernelSpec{KernelKind::rbf, 0.7}), 1.0);
  EXPECT_THROW(kernel_eval(V{1}, V{1, 2}, KernelSpec{}), Error);
  EXPECT_EQ(kernel_kind_from_string("poly"), KernelKind::polynomial);
  EXPECT_THROW(kernel_kind_from_string("sigmoid"), Error);
}

TEST(Svr, ConstantTarget) {
  for (auto kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    SvrConfig cfg;
    cfg.kernel.kind = kind;
    const auto ds = make_dataset({{0}, {1}, {2}, {5}}, {3, 3, 3, 3});
    const auto sol = solve_svr_dual(ds, cfg);
    for (double b : sol.beta) EXPECT_EQ(b, 0.0);
    const auto m = fit_svr(ds, cfg);
    EXPECT_TRUE(m.dual_coefficients.empty());
    EXPECT_NEAR(m.bias, 3.0, 1e-12);
    EXPECT_NEAR(predict_svr(m, V{17}), 3.0, 1e-12);
  }
}

TEST(Svr, ExactLineWithinTube) {
  const auto ds = line_data(5, 0, 4, 0, 2);
  const auto m = fit_svr(ds, linear_cfg(100, 0.1));
  EXPECT_TRUE(m.converged);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_LE(std::abs(predict_svr(m, ds.features.row(i)) - ds.target[i]), 0.1 + 1e-3);
  EXPECT_NEAR(predict_svr(m, V{1.5}), 3.0, 0.2);
}

TEST(Svr, PredictExamples) {
  SvrModel empty;
  empty.bias = 5;
  EXPECT_EQ(predict_svr(empty, V{1, 2}), 5.0);
  SvrModel one;
  one.support_vectors = Matrix::from_rows({{2}});
  one.dual_coefficients = {1};
  EXPECT_EQ(predict_svr(one, V{3}), 6.0);
  EXPECT_THROW(predict_svr(one, V{3, 4}), Error);
}

TEST(Svr, Errors) {
  EXPECT_THROW(fit_svr(make_dataset({{0}}, {1})), Error);
  EXPECT_THROW(fit_svr(make_dataset({{0}, {1}}, {1, 2}), linear_cfg(0, 0.1)), Error);
  EXPECT_THROW(fit_svr(make_dataset({{0}, {1}}, {1, 2}), linear_cfg(1, -0.1)), Error);
}

TEST(Svr, FeasibilityAndMonotoneObjectiveProperty) {
  Rng rng(71);
  for (int trial = 0; trial < 60; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 2 + rng.below(60), 1 + rng.below(3));
    SvrConfig cfg;
    cfg.kernel.kind = static_cast<KernelKind>(rng.below(3));
    cfg.C = rng.uniform(0.1, 20);
    cfg.epsilon = rng.uniform(0, 0.5);
    const auto sol = solve_svr_dual(ds, cfg);
    double sum = 0;
    for (double b : sol.beta) {
      EXPECT_LE(std::abs(b), cfg.C);
      sum += b;
    }
    EXPECT_LE(std::abs(sum), cfg.tolerance);
    for (std::size_t p = 1; p < sol.objective_history.size(); ++p)
      EXPECT_GE(sol.objective_history[p], sol.objective_history[p - 1] - 1e-12 * std::abs(sol.objective_history[p - 1]));
    const auto g = gram_of(ds, sol.kernel);
    EXPECT_NEAR(sol.objective(), svr_dual_objective(Matrix::from_rows(g), ds.target, sol.beta, cfg.epsilon),
                1e-8 * std::max(1.0, std::abs(sol.objective())));
  }
}

TEST(Svr, MatchesQpOracleProperty) {
  Rng rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = testsupport::random_dataset(rng, 2 + rng.below(7), 1 + rng.below(2));
    SvrConfig cfg;
    cfg.kernel.kind = static_cast<KernelKind>(rng.below(3));
    cfg.C = rng.uniform(0.1, 5);
    cfg.epsilon = rng.uniform(0, 0.5);
    const auto sol = solve_svr_dual(ds, cfg);
    const double best = oracle::svr_dual_optimum(gram_of(ds, sol.kernel), ds.target, cfg.C, cfg.epsilon);
    EXPECT_NEAR(sol.objective(), best, 1e-3) << "trial " << trial;
  }
}

TEST(Svr, LinearSlopeMatchesOls) {
  const auto ds = line_data(50, 0, 10, 3, 2);
  const auto m = fit_svr(ds, linear_cfg(100, 0.1));
  double w = 0;
  for (std::size_t i = 0; i < m.dual_coefficients.size(); ++i) w += m.dual_coefficients[i] * m.support_vectors(i, 0);
  const double ols = fit_ols(ds).coefficients[1];
  EXPECT_NEAR(w / ols, 1.0, 0.02);
}

TEST(Svr, Deterministic) {
  Rng rng(73);
  const auto ds = testsupport::random_dataset(rng, 80, 2);
  SvrConfig cfg;
  cfg.kernel.kind = KernelKind::rbf;
  const auto a = solve_svr_dual(ds, cfg);
  const auto b = solve_svr_dual(ds, cfg);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(Svr, AutoGamma) {
  const auto x = Matrix::from_rows({{0, 2}, {2, 0}});
  EXPECT_DOUBLE_EQ(scale_gamma(x), 0.5);  // var of {0,2,2,0} = 1, d = 2
  const auto k = resolve_kernel(KernelSpec{KernelKind::rbf}, x);
  EXPECT_DOUBLE_EQ(k.gamma, 0.5);
  EXPECT_EQ(resolve_kernel(KernelSpec{KernelKind::rbf, 3.0}, x).gamma, 3.0);
}
