#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"

namespace heliocast {

/// Inverse-distance weighted k-nearest-neighbour regressor over Euclidean
/// distance. Stores the full training set.
struct KnnModel {
  Matrix train_features;
  std::vector<double> train_targets;
  std::size_t k = 10;
  // Optional per-feature standardization; empty when disabled.
  std::vector<double> center;
  std::vector<double> scale;

  std::size_t effective_k() const { return std::min(k, train_targets.size()); }
  bool standardized() const { return !scale.empty(); }
};

inline KnnModel fit_knn(const Dataset& ds, std::size_t k = 10, bool standardize = false) {
  ds.validate();
  require(ds.size() >= 1, "knn: empty dataset");
  require(k >= 1, "knn: k must be >= 1");
  KnnModel m;
  m.k = k;
  m.train_targets = ds.target;
  m.train_features = ds.features;
  if (standardize) {
    const std::size_t d = ds.dims();
    m.center.assign(d, 0.0);
    m.scale.assign(d, 1.0);
    for (std::size_t c = 0; c < d; ++c) {
      const auto col = ds.features.column(c);
      double mean = 0.0;
      for (double v : col) mean += v;
      mean /= double(col.size());
      double var = 0.0;
      for (double v : col) var += (v - mean) * (v - mean);
      var /= double(col.size());
      m.center[c] = mean;
      m.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    for (std::size_t i = 0; i < m.train_features.rows(); ++i) {
      auto row = m.train_features.row(i);
      for (std::size_t c = 0; c < d; ++c) row[c] = (row[c] - m.center[c]) / m.scale[c];
    }
  }
  return m;
}

inline double predict_knn(const KnnModel& m, std::span<const double> query) {
  const std::size_t d = m.train_features.cols();
  if (query.size() != d)
    fail(ErrorCode::invalid_argument, "knn expects " + std::to_string(d) + " features, got " +
                                          std::to_string(query.size()));
  require(!m.train_targets.empty(), "knn: model has no training rows");

  std::vector<double> q(query.begin(), query.end());
  if (m.standardized())
    for (std::size_t c = 0; c < d; ++c) q[c] = (q[c] - m.center[c]) / m.scale[c];

  // (squared distance, training index); lexicographic order breaks ties by index.
  std::vector<std::pair<double, std::size_t>> dist(m.train_targets.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto row = m.train_features.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += (row[c] - q[c]) * (row[c] - q[c]);
    dist[i] = {s, i};
  }
  const std::size_t k = m.effective_k();
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  double zero_sum = 0.0;
  std::size_t zero_count = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (dist[j].first == 0.0) {
      zero_sum += m.train_targets[dist[j].second];
      ++zero_count;
    }
  }
  if (zero_count > 0) return zero_sum / double(zero_count);

  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = 1.0 / std::sqrt(dist[j].first);
    num += w * m.train_targets[dist[j].second];
    den += w;
  }
  return num / den;
}

inline std::vector<double> predict_knn(const KnnModel& m, const Matrix& rows) {
  std::vector<double> out;
  out.reserve(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out.push_back(predict_knn(m, rows.row(i)));
  return out;
}

}  // namespace heliocast
