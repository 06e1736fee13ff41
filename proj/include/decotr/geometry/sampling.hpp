#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "decotr/geometry/camera.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::geometry {

/// Row-major N x K table of point indices.
struct NeighborTable {
  std::size_t points = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;

  std::size_t at(std::size_t i, std::size_t j) const { return indices[i * k + j]; }
  bool operator==(const NeighborTable&) const = default;
};

/// For each point the K nearest other points, ordered by (distance, index).
/// positions is [N x 3]. Throws ContractError unless 1 <= K <= N - 1.
NeighborTable knn(const Tensor& positions, std::size_t k);

/// Greedy farthest-point sampling from start_index; ties go to the lower
/// index. Throws ContractError unless 1 <= count <= N and start_index < N.
std::vector<std::size_t> downsample_fps(const Tensor& positions, std::size_t count, std::size_t start_index = 0);

/// For every point, the position in `selected` of its nearest selected point
/// (ties to the earlier entry).
std::vector<std::size_t> nearest_selected(const Tensor& positions, const std::vector<std::size_t>& selected);

/// Keeps n valid pixels chosen uniformly without replacement (all of them if
/// n exceeds the valid count) and zeroes the rest.
/// Throws ContractError if n == 0 or the map has no valid pixel.
SparseDepth sample_sparse_depth(const DepthMap& dense, std::size_t n, std::uint64_t seed);

}  // namespace decotr::geometry
