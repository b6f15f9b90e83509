#pragma once

// Ordinary least squares on raw or degree-2 polynomial features, solved by
// Householder QR.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"

namespace heliocast {

/// Number of expanded features (intercept included) for `dims` raw inputs.
inline std::size_t expanded_size(std::size_t dims, int degree) {
  require(degree == 1 || degree == 2, "polynomial degree must be 1 or 2");
  return degree == 1 ? dims + 1 : 1 + dims + dims * (dims + 1) / 2;
}

/// [1, x1..xd] and, for degree 2, every x_i * x_j with i <= j in (i, j) order.
inline std::vector<double> expand_polynomial(std::span<const double> row, int degree) {
  std::vector<double> out;
  out.reserve(expanded_size(row.size(), degree));
  out.push_back(1.0);
  out.insert(out.end(), row.begin(), row.end());
  if (degree == 2) {
    for (std::size_t i = 0; i < row.size(); ++i)
      for (std::size_t j = i; j < row.size(); ++j) out.push_back(row[i] * row[j]);
  }
  return out;
}

inline std::vector<std::string> expanded_names(const std::vector<std::string>& names, int degree) {
  std::vector<std::string> out{"intercept"};
  out.insert(out.end(), names.begin(), names.end());
  if (degree == 2) {
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i; j < names.size(); ++j)
        out.push_back(i == j ? names[i] + "^2" : names[i] + "*" + names[j]);
  }
  return out;
}

struct LinearModel {
  std::vector<double> coefficients;
  std::vector<std::string> feature_names;  // expanded; first is "intercept"
  int degree = 1;
  std::size_t input_dims = 0;
};

inline LinearModel fit_ols(const Dataset& ds, int degree = 1) {
  ds.validate();
  const std::size_t n = ds.size();
  const std::size_t p = expanded_size(ds.dims(), degree);
  const auto names = expanded_names(ds.feature_names, degree);
  if (n < p)
    fail(ErrorCode::invalid_argument, "ols: " + std::to_string(n) + " rows for " +
                                          std::to_string(p) + " coefficients");

  // Column-major copy of the design matrix; reflections are applied in place.
  std::vector<std::vector<double>> a(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto phi = expand_polynomial(ds.features.row(i), degree);
    for (std::size_t j = 0; j < p; ++j) a[j][i] = phi[j];
  }
  std::vector<double> rhs = ds.target;
  std::vector<double> column_norm(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (double v : a[j]) s += v * v;
    column_norm[j] = std::sqrt(s);
  }

  std::vector<double> diag(p);
  for (std::size_t k = 0; k < p; ++k) {
    auto& col = a[k];
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    // What is left of column k after projecting out columns 0..k-1.
    if (norm <= 1e-10 * column_norm[k] || column_norm[k] == 0.0) {
      std::string earlier;
      for (std::size_t j = 0; j < k; ++j) earlier += (j ? ", " : "") + names[j];
      fail(ErrorCode::rank_deficient, "ols: column '" + names[k] +
                                          "' is linearly dependent on [" + earlier + "]");
    }
    const double alpha = col[k] > 0.0 ? -norm : norm;
    // v = x - alpha e1, stored in col[k..n); H = I - 2 v v^T / (v^T v)
    col[k] -= alpha;
    double vtv = 0.0;
    for (std::size_t i = k; i < n; ++i) vtv += col[i] * col[i];
    auto reflect = [&](std::vector<double>& target) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += col[i] * target[i];
      const double f = 2.0 * dot / vtv;
      for (std::size_t i = k; i < n; ++i) target[i] -= f * col[i];
    };
    for (std::size_t j = k + 1; j < p; ++j) reflect(a[j]);
    reflect(rhs);
    diag[k] = alpha;
  }

  // Back substitution on R beta = Q^T y; R's strict upper part lives in a[j][k], k < j.
  std::vector<double> beta(p);
  for (std::size_t kk = p; kk-- > 0;) {
    double s = rhs[kk];
    for (std::size_t j = kk + 1; j < p; ++j) s -= a[j][kk] * beta[j];
    beta[kk] = s / diag[kk];
  }
  return LinearModel{std::move(beta), names, degree, ds.dims()};
}

inline double predict_linear(const LinearModel& m, std::span<const double> row) {
  if (row.size() != m.input_dims)
    fail(ErrorCode::invalid_argument, "linear model expects " + std::to_string(m.input_dims) +
                                          " features, got " + std::to_string(row.size()));
  const auto phi = expand_polynomial(row, m.degree);
  require(phi.size() == m.coefficients.size(), "linear model coefficient count mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) s += m.coefficients[j] * phi[j];
  return s;
}

inline std::vector<double> predict_linear(const LinearModel& m, const Matrix& rows) {
  std::vector<double> out;
  out.reserve(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out.push_back(predict_linear(m, rows.row(i)));
  return out;
}

}  // namespace heliocast
