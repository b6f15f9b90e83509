#pragma once

// Hand-rolled generators for property tests. Every helper takes an explicit
// Rng so failures reproduce from the seed printed by the test.

#include <cstddef>
#include <string>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/random.hpp"

namespace testsupport {

using heliocast::Dataset;
using heliocast::Matrix;
using heliocast::Rng;

inline Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                            const std::vector<double>& target) {
  Dataset ds;
  ds.features = Matrix::from_rows(rows);
  ds.target = target;
  for (std::size_t c = 0; c < ds.features.cols(); ++c) ds.feature_names.push_back("x" + std::to_string(c));
  return ds;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::vector<std::vector<double>> random_rows(Rng& rng, std::size_t n, std::size_t d,
                                                    double lo = -1.0, double hi = 1.0) {
  std::vector<std::vector<double>> rows(n);
  for (auto& r : rows) r = random_vector(rng, d, lo, hi);
  return rows;
}

/// Random dataset; `grid` > 0 snaps features to multiples of 1/grid so ties occur.
inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d, int grid = 0) {
  auto rows = random_rows(rng, n, d);
  if (grid > 0)
    for (auto& r : rows)
      for (auto& x : r) x = std::round(x * grid) / grid;
  return make_dataset(rows, random_vector(rng, n, -5.0, 5.0));
}

inline std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace testsupport
