#pragma once

// Epsilon-insensitive support vector regression trained by pairwise
// coordinate ascent (SMO) on the single-variable dual
//
//   maximize  W(b) = -1/2 b'Kb + y'b - eps * sum|b_i|
//   subject to  -C <= b_i <= C,  sum b_i = 0
//
// where b_i = alpha_i - alpha_i*.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"
#include "heliocast/random.hpp"

namespace heliocast {

enum class KernelKind { linear, polynomial, rbf };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::rbf: return "rbf";
  }
  return "unknown";
}

inline KernelKind kernel_kind_from_string(std::string_view s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "polynomial" || s == "poly") return KernelKind::polynomial;
  if (s == "rbf") return KernelKind::rbf;
  fail(ErrorCode::invalid_argument, "unknown kernel '" + std::string(s) + "'");
}

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 0.0;  // 0 selects 1 / (d * var(X)) at fit time
  double coef0 = 0.0;
  int degree = 3;

  void validate() const {
    require(gamma >= 0.0, "kernel gamma must be non-negative");
    require(kind != KernelKind::polynomial || degree >= 1, "polynomial degree must be >= 1");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double kernel_eval(std::span<const double> u, std::span<const double> v,
                          const KernelSpec& spec) {
  require(u.size() == v.size(), "kernel_eval: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::linear: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return dot;
    }
    case KernelKind::polynomial: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return std::pow(spec.gamma * dot + spec.coef0, spec.degree);
    }
    case KernelKind::rbf: {
      double sq = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) sq += (u[i] - v[i]) * (u[i] - v[i]);
      return std::exp(-spec.gamma * sq);
    }
  }
  return 0.0;
}

struct SvrConfig {
  KernelSpec kernel{};
  double C = 1.0;
  double epsilon = 0.1;
  double tolerance = 1e-3;
  std::size_t max_passes = 1000;
  std::uint64_t seed = 42;
};

/// Full dual solution over all training rows.
struct SvrDualSolution {
  std::vector<double> beta;
  double bias = 0.0;
  KernelSpec kernel{};  // gamma resolved
  bool converged = false;
  std::size_t iterations = 0;
  double max_violation = 0.0;
  // W(beta) after every completed pass of n pair updates, and at exit.
  std::vector<double> objective_history;

  double objective() const { return objective_history.back(); }
};

struct SvrModel {
  Matrix support_vectors;
  std::vector<double> dual_coefficients;
  double bias = 0.0;
  KernelSpec kernel{};
  double C = 1.0;
  double epsilon = 0.1;
  bool converged = false;
  double objective = 0.0;
};

/// 1 / (d * var(X)) over every entry of X; 1 when X is constant.
inline double scale_gamma(const Matrix& x) {
  const auto& v = x.data();
  if (v.empty()) return 1.0;
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= double(v.size());
  double var = 0.0;
  for (double a : v) var += (a - mean) * (a - mean);
  var /= double(v.size());
  return var > 0.0 ? 1.0 / (double(x.cols()) * var) : 1.0;
}

/// W(beta) for an explicit kernel matrix; used to audit solutions.
inline double svr_dual_objective(const Matrix& gram, std::span<const double> y,
                                 std::span<const double> beta, double epsilon) {
  double quad = 0.0, lin = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) row += gram(i, j) * beta[j];
    quad += beta[i] * row;
    lin += y[i] * beta[i];
    l1 += std::abs(beta[i]);
  }
  return -0.5 * quad + lin - epsilon * l1;
}

namespace detail {

class SmoSolver {
 public:
  SmoSolver(const Matrix& x, std::span<const double> y, const KernelSpec& kernel,
            const SvrConfig& cfg)
      : x_(x), y_(y), kernel_(kernel), cfg_(cfg), n_(y.size()), rng_(cfg.seed) {}

  SvrDualSolution solve() {
    beta_.assign(n_, 0.0);
    grad_.assign(y_.begin(), y_.end());  // g = y - K beta
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = kernel_eval(x_.row(i), x_.row(i), kernel_);

    SvrDualSolution out;
    out.kernel = kernel_;
    const std::size_t budget = cfg_.max_passes * n_;
    std::size_t stalls = 0;
    std::size_t it = 0;
    for (; it < budget; ++it) {
      if (it > 0 && it % n_ == 0) out.objective_history.push_back(objective());
      const auto [i, violation] = pick_first();
      out.max_violation = violation;
      if (violation < cfg_.tolerance) {
        out.converged = true;
        break;
      }
      row_i_ = kernel_row(i);
      const auto j = pick_second(i);
      if (j != npos && i != j && step(i, j)) {
        stalls = 0;
        continue;
      }
      // Stalled on the best pair: try a random pair before giving up.
      if (++stalls > n_) break;
      const auto a = static_cast<std::size_t>(rng_.below(n_));
      auto b = static_cast<std::size_t>(rng_.below(n_ - 1));
      if (b >= a) ++b;
      row_i_ = kernel_row(a);
      step(a, b);
    }
    out.iterations = it;
    if (!out.converged) out.max_violation = pick_first().second;
    out.objective_history.push_back(objective());
    out.bias = bias();
    out.beta = beta_;
    return out;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  bool can_increase(std::size_t i) const { return beta_[i] < cfg_.C; }
  bool can_decrease(std::size_t i) const { return beta_[i] > -cfg_.C; }
  // Directional derivatives of W when raising / lowering beta_i.
  double up(std::size_t i) const {
    return grad_[i] + (beta_[i] >= 0.0 ? -cfg_.epsilon : cfg_.epsilon);
  }
  double down(std::size_t i) const {
    return grad_[i] + (beta_[i] <= 0.0 ? cfg_.epsilon : -cfg_.epsilon);
  }

  std::pair<std::size_t, double> pick_first() const {
    double max_up = -std::numeric_limits<double>::infinity();
    double min_down = std::numeric_limits<double>::infinity();
    std::size_t arg = npos;
    for (std::size_t k = 0; k < n_; ++k) {
      if (can_increase(k) && up(k) > max_up) {
        max_up = up(k);
        arg = k;
      }
      if (can_decrease(k)) min_down = std::min(min_down, down(k));
    }
    if (arg == npos || !std::isfinite(min_down)) return {0, 0.0};
    return {arg, max_up - min_down};
  }

  std::size_t pick_second(std::size_t i) const {
    const double ui = up(i);
    std::size_t best = npos;
    double best_gain = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i || !can_decrease(j)) continue;
      const double gap = ui - down(j);
      if (gap <= 0.0) continue;
      const double eta = std::max(diag_[i] + diag_[j] - 2.0 * row_i_[j], 1e-12);
      const double gain = gap * gap / eta;
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    return best;
  }

  std::vector<double> kernel_row(std::size_t i) const {
    std::vector<double> row(n_);
    for (std::size_t k = 0; k < n_; ++k) row[k] = kernel_eval(x_.row(i), x_.row(k), kernel_);
    return row;
  }

  // Exact maximization of W along beta_i += t, beta_j -= t. Returns false
  // when no strictly improving step exists.
  bool step(std::size_t i, std::size_t j) {
    const double C = cfg_.C, eps = cfg_.epsilon;
    const double bi = beta_[i], bj = beta_[j];
    const double eta = diag_[i] + diag_[j] - 2.0 * row_i_[j];
    const double dg = grad_[i] - grad_[j];
    const double lo = std::max(-C - bi, bj - C);
    const double hi = std::min(C - bi, bj + C);
    if (!(lo < hi)) return false;

    auto value = [&](double t) {
      return t * dg - 0.5 * eta * t * t - eps * (std::abs(bi + t) + std::abs(bj - t));
    };
    std::array<double, 4> cuts{lo, -bi, bj, hi};
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> candidates{0.0, lo, hi};
    for (double c : cuts)
      if (c > lo && c < hi) candidates.push_back(c);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double a = std::max(cuts[s], lo), b = std::min(cuts[s + 1], hi);
      if (!(a < b) || eta <= 0.0) continue;
      const double mid = 0.5 * (a + b);
      const double si = (bi + mid) > 0.0 ? 1.0 : -1.0;
      const double sj = (bj - mid) > 0.0 ? 1.0 : -1.0;
      candidates.push_back(std::clamp((dg - eps * si + eps * sj) / eta, a, b));
    }
    double best_t = 0.0, best_v = value(0.0);
    for (double t : candidates) {
      const double v = value(t);
      if (v > best_v) {
        best_v = v;
        best_t = t;
      }
    }
    if (best_t == 0.0 || !(best_v > value(0.0))) return false;

    beta_[i] = snap(bi + best_t);
    beta_[j] = snap(bj - best_t);
    const double ti = beta_[i] - bi;
    const double tj = bj - beta_[j];
    const auto row_j = kernel_row(j);
    for (std::size_t k = 0; k < n_; ++k) grad_[k] -= ti * row_i_[k] - tj * row_j[k];
    return true;
  }

  double snap(double b) const {
    const double C = cfg_.C;
    const double tol = 1e-12 * C;
    if (std::abs(b - C) <= tol) return C;
    if (std::abs(b + C) <= tol) return -C;
    if (std::abs(b) <= tol) return 0.0;
    return b;
  }

  // W = 1/2 beta'(y + g) - eps |beta|_1, using g = y - K beta.
  double objective() const {
    double s = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      s += beta_[k] * (y_[k] + grad_[k]);
      l1 += std::abs(beta_[k]);
    }
    return 0.5 * s - cfg_.epsilon * l1;
  }

  double bias() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      const double b = beta_[k];
      if (b != 0.0 && std::abs(b) < cfg_.C) {
        sum += grad_[k] - (b > 0.0 ? cfg_.epsilon : -cfg_.epsilon);
        ++count;
      }
    }
    if (count > 0) return sum / double(count);
    double max_up = -std::numeric_limits<double>::infinity();
    double min_down = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_; ++k) {
      if (can_increase(k)) max_up = std::max(max_up, up(k));
      if (can_decrease(k)) min_down = std::min(min_down, down(k));
    }
    if (std::isfinite(max_up) && std::isfinite(min_down)) return 0.5 * (max_up + min_down);
    return std::isfinite(max_up) ? max_up : min_down;
  }

  const Matrix& x_;
  std::span<const double> y_;
  KernelSpec kernel_;
  SvrConfig cfg_;
  std::size_t n_;
  Rng rng_;
  std::vector<double> beta_, grad_, diag_, row_i_;
};

}  // namespace detail

inline KernelSpec resolve_kernel(const KernelSpec& spec, const Matrix& x) {
  KernelSpec k = spec;
  if (k.kind != KernelKind::linear && k.gamma == 0.0) k.gamma = scale_gamma(x);
  return k;
}

inline SvrDualSolution solve_svr_dual(const Dataset& ds, const SvrConfig& cfg) {
  ds.validate();
  cfg.kernel.validate();
  require(ds.size() >= 2, "fit_svr: need at least two rows");
  require(cfg.C > 0.0, "fit_svr: C must be positive");
  require(cfg.epsilon >= 0.0, "fit_svr: epsilon must be non-negative");
  require(cfg.max_passes >= 1, "fit_svr: max_passes must be >= 1");
  const auto kernel = resolve_kernel(cfg.kernel, ds.features);
  return detail::SmoSolver(ds.features, ds.target, kernel, cfg).solve();
}

/// Fits and keeps only rows with a nonzero dual coefficient. A fit that runs
/// out of passes is returned with `converged == false`.
inline SvrModel fit_svr(const Dataset& ds, const SvrConfig& cfg = {}) {
  const auto sol = solve_svr_dual(ds, cfg);
  SvrModel m;
  m.kernel = sol.kernel;
  m.C = cfg.C;
  m.epsilon = cfg.epsilon;
  m.bias = sol.bias;
  m.converged = sol.converged;
  m.objective = sol.objective();
  for (std::size_t i = 0; i < sol.beta.size(); ++i) {
    if (sol.beta[i] != 0.0) {
      m.support_vectors.append_row(ds.features.row(i));
      m.dual_coefficients.push_back(sol.beta[i]);
    }
  }
  if (m.support_vectors.cols() == 0) m.support_vectors = Matrix(0, ds.dims());
  return m;
}

inline double predict_svr(const SvrModel& m, std::span<const double> row) {
  if (m.support_vectors.cols() != 0 && row.size() != m.support_vectors.cols())
    fail(ErrorCode::invalid_argument, "svr expects " + std::to_string(m.support_vectors.cols()) +
                                          " features, got " + std::to_string(row.size()));
  double s = m.bias;
  for (std::size_t i = 0; i < m.dual_coefficients.size(); ++i)
    s += m.dual_coefficients[i] * kernel_eval(m.support_vectors.row(i), row, m.kernel);
  return s;
}

}  // namespace heliocast
