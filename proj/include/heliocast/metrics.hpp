#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "heliocast/error.hpp"

namespace heliocast {

/// MSE, RMSE, MAE and R^2 of one prediction set. `r2` is empty when the
/// observed values have zero variance (including n = 1).
struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;
  std::size_t n = 0;
};

inline MetricsReport score(std::span<const double> actual, std::span<const double> predicted) {
  require(actual.size() == predicted.size(), "score: actual and predicted lengths differ");
  require(!actual.empty(), "score: empty input");
  const double n = double(actual.size());

  double mean = 0.0;
  for (double y : actual) mean += y;
  mean /= n;

  double sse = 0.0, sae = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    sse += e * e;
    sae += std::abs(e);
    const double c = actual[i] - mean;
    sst += c * c;
  }

  MetricsReport m;
  m.n = actual.size();
  m.mse = sse / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = sae / n;
  // Constant observations can leave sst as rounding residue; test equality instead.
  bool constant = true;
  for (double y : actual) constant = constant && y == actual[0];
  if (!constant && sst > 0.0) m.r2 = 1.0 - sse / sst;
  return m;
}

}  // namespace heliocast
