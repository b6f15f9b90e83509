#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"

namespace heliocast {

/// Sample Pearson correlation. Throws when either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "pearson: length mismatch");
  require(x.size() >= 2, "pearson: need at least two observations");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, "pearson: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Matrix values;

  std::size_t index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) fail(ErrorCode::not_found, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - labels.begin());
  }

  double at(const std::string& a, const std::string& b) const {
    return values(index_of(a), index_of(b));
  }
};

/// Pairwise correlations over every feature column plus the target, which is
/// appended last under `target_label`.
inline CorrelationMatrix correlation_matrix(const Dataset& ds,
                                            const std::string& target_label = "irradiance") {
  std::vector<std::vector<double>> columns;
  CorrelationMatrix cm;
  for (std::size_t c = 0; c < ds.dims(); ++c) {
    columns.push_back(ds.features.column(c));
    cm.labels.push_back(ds.feature_names[c]);
  }
  columns.push_back(ds.target);
  cm.labels.push_back(target_label);

  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    if (col.size() < 2 || *lo == *hi)
      fail(ErrorCode::invalid_argument, "column '" + cm.labels[c] + "' is constant");
  }

  const std::size_t d = columns.size();
  cm.values = Matrix(d, d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    cm.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      const double r = pearson(columns[i], columns[j]);
      cm.values(i, j) = r;
      cm.values(j, i) = r;
    }
  }
  return cm;
}

/// Features whose |corr| with the target reaches `threshold`, strongest first.
inline std::vector<std::string> select_variables(const CorrelationMatrix& cm,
                                                 const std::string& target_label,
                                                 double threshold = 0.1) {
  const auto target = cm.index_of(target_label);
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    if (i == target) continue;
    if (std::abs(cm.values(i, target)) >= threshold) picked.push_back(i);
  }
  std::stable_sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
    const double ca = std::abs(cm.values(a, target));
    const double cb = std::abs(cm.values(b, target));
    if (ca != cb) return ca > cb;
    return cm.labels[a] < cm.labels[b];
  });
  std::vector<std::string> out;
  for (auto i : picked) out.push_back(cm.labels[i]);
  return out;
}

/// Labels as the first row and first column.
inline void write_correlation_csv(std::ostream& out, const CorrelationMatrix& cm) {
  out << "label";
  for (const auto& l : cm.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    out << cm.labels[i];
    for (std::size_t j = 0; j < cm.labels.size(); ++j) out << ',' << format_double(cm.values(i, j));
    out << '\n';
  }
}

}  // namespace heliocast
