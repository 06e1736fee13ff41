#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "decotr/tensor/tensor.hpp"

namespace decotr::testing {

inline std::vector<double> pairwise_squared_distances(const Tensor& positions) {
  const std::size_t n = positions.dim(0);
  const auto p = positions.data();
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = p[3 * j] - p[3 * i];
      const double dy = p[3 * j + 1] - p[3 * i + 1];
      const double dz = p[3 * j + 2] - p[3 * i + 2];
      d[i * n + j] = dx * dx + dy * dy + dz * dz;
    }
  }
  return d;
}

// Full distance matrix, every row stable-sorted by distance.
inline std::vector<std::size_t> knn_oracle(const Tensor& positions, std::size_t k) {
  const std::size_t n = positions.dim(0);
  const auto d = pairwise_squared_distances(positions);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::stable_sort(others.begin(), others.end(),
                     [&](std::size_t a, std::size_t b) { return d[i * n + a] < d[i * n + b]; });
    out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

// Recomputes every candidate's distance to the whole selected set each round.
inline std::vector<std::size_t> fps_oracle(const Tensor& positions, std::size_t count, std::size_t start) {
  const std::size_t n = positions.dim(0);
  const auto d = pairwise_squared_distances(positions);
  std::vector<std::size_t> selected{start};
  while (selected.size() < count) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t s : selected) m = std::min(m, d[s * n + j]);
      if (m > best_d) {
        best_d = m;
        best = j;
      }
    }
    selected.push_back(best);
  }
  return selected;
}

}  // namespace decotr::testing
