#include "decotr/geometry/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "decotr/errors.hpp"
#include "decotr/simd/kernels.hpp"

namespace decotr::geometry {
namespace {

struct Columns {
  std::vector<double> x, y, z;
  std::size_t size() const { return x.size(); }
};

Columns split_positions(const Tensor& positions) {
  if (positions.rank() != 2 || positions.dim(1) != 3) {
    throw DimensionError("positions must be [N x 3], got " + shape_string(positions.shape()));
  }
  const std::size_t n = positions.dim(0);
  const auto p = positions.data();
  Columns c;
  c.x.resize(n);
  c.y.resize(n);
  c.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.x[i] = p[3 * i];
    c.y[i] = p[3 * i + 1];
    c.z[i] = p[3 * i + 2];
  }
  return c;
}

void distances_from(const Columns& c, std::size_t i, std::vector<double>& out) {
  simd::squared_distances(c.x, c.y, c.z, c.x[i], c.y[i], c.z[i], out);
}

}  // namespace

NeighborTable knn(const Tensor& positions, std::size_t k) {
  const Columns c = split_positions(positions);
  const std::size_t n = c.size();
  if (k == 0 || k >= n) {
    throw ContractError("knn needs 1 <= K <= N - 1, got K=" + std::to_string(k) + " for N=" + std::to_string(n));
  }
  NeighborTable table{n, k, std::vector<std::size_t>(n * k)};
  std::vector<double> d2(n);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    distances_from(c, i, d2);
    std::size_t slot = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order[slot++] = j;
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
    std::copy_n(order.begin(), k, table.indices.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  if (detail::kink_probe_active()) detail::kink_probe_mix_indices(table.indices);
  return table;
}

std::vector<std::size_t> downsample_fps(const Tensor& positions, std::size_t count, std::size_t start_index) {
  const Columns c = split_positions(positions);
  const std::size_t n = c.size();
  if (count == 0 || count > n) {
    throw ContractError("fps needs 1 <= count <= N, got " + std::to_string(count) + " for N=" + std::to_string(n));
  }
  if (start_index >= n) throw ContractError("fps start index out of range");
  std::vector<std::size_t> selected{start_index};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<double> d2(n);
  std::size_t last = start_index;
  while (selected.size() < count) {
    distances_from(c, last, d2);
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      nearest[j] = std::min(nearest[j], d2[j]);
      if (nearest[j] > best_d) {
        best_d = nearest[j];
        best = j;
      }
    }
    selected.push_back(best);
    last = best;
  }
  if (detail::kink_probe_active()) detail::kink_probe_mix_indices(selected);
  return selected;
}

std::vector<std::size_t> nearest_selected(const Tensor& positions, const std::vector<std::size_t>& selected) {
  const Columns c = split_positions(positions);
  const std::size_t n = c.size();
  if (selected.empty()) throw ContractError("nearest_selected needs at least one selected point");
  std::vector<std::size_t> owner(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<double> d2(n);
  for (std::size_t s = 0; s < selected.size(); ++s) {
    if (selected[s] >= n) throw IndexError("selected index out of range");
    distances_from(c, selected[s], d2);
    for (std::size_t j = 0; j < n; ++j) {
      if (d2[j] < best[j]) {
        best[j] = d2[j];
        owner[j] = s;
      }
    }
  }
  if (detail::kink_probe_active()) detail::kink_probe_mix_indices(owner);
  return owner;
}

SparseDepth sample_sparse_depth(const DepthMap& dense, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("sparse sample count must be at least 1");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense.values[i] > 0.0) valid.push_back(i);
  }
  if (valid.empty()) throw ContractError("depth map has no valid pixel to sample");
  SparseDepth out = DepthMap::zeros(dense.height, dense.width);
  const std::size_t keep = std::min(n, valid.size());
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `keep` entries become the sample.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, valid.size() - 1);
    std::swap(valid[i], valid[pick(rng)]);
    out.values[valid[i]] = dense.values[valid[i]];
  }
  return out;
}

}  // namespace decotr::geometry
