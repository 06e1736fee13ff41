#pragma once

#include <cstddef>
#include <vector>

#include "decotr/tensor/tensor.hpp"

namespace decotr::geometry {

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double gamma_u = 1.0;
  double gamma_v = 1.0;
  double c_u = 0.0;
  double c_v = 0.0;

  /// Throws GeometryError unless both focal lengths are positive and finite.
  void validate() const;

  /// Intrinsics of the same camera sampled on a grid `factor` times coarser,
  /// where coarse pixel (u', v') covers fine pixels [f*u', f*u' + f).
  /// Pixel centres map as c' = (c + 0.5) / f - 0.5.
  CameraIntrinsics downscaled(std::size_t factor) const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Row-major depth image in meters. Zero marks an invalid pixel.
struct DepthMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  static DepthMap zeros(std::size_t height, std::size_t width);
  /// Copies a [1 x H x W] or [H x W] tensor.
  static DepthMap from_tensor(const Tensor& t);

  double at(std::size_t v, std::size_t u) const { return values[v * width + u]; }
  double& at(std::size_t v, std::size_t u) { return values[v * width + u]; }
  std::size_t size() const { return values.size(); }
  std::size_t valid_count() const;
  /// [1 x H x W] tensor without gradient.
  Tensor to_tensor() const;
  /// Throws DimensionError on size mismatch and DomainError on negative or
  /// non-finite values.
  void validate() const;

  bool operator==(const DepthMap&) const = default;
};

/// A sparse depth map is a depth map with most pixels invalid.
using SparseDepth = DepthMap;

/// Mean of each f x f block over its valid pixels; blocks without any valid
/// pixel become invalid. H and W must be divisible by f.
DepthMap average_pool_valid(const DepthMap& depth, std::size_t factor);

}  // namespace decotr::geometry
