#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "decotr/geometry/camera.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::geometry {

struct PixelIndex {
  std::size_t u = 0;
  std::size_t v = 0;
  bool operator==(const PixelIndex&) const = default;
};

/// Points lifted from an image. positions is [N x 3] (x, y, z) in meters and
/// features is [N x C]; both keep their autodiff history.
struct FeaturePointCloud {
  Tensor positions;
  Tensor features;
  std::vector<PixelIndex> pixels;
  std::size_t image_height = 0;
  std::size_t image_width = 0;

  std::size_t size() const { return pixels.size(); }
  std::array<double, 3> position(std::size_t i) const;
};

struct NormalizationTransform {
  std::array<double, 3> centroid{0.0, 0.0, 0.0};
  double scale = 1.0;
};

/// Lifts every pixel with d > 0:  x = d (u - c_u) / gamma_u,
/// y = d (v - c_v) / gamma_v, z = d. features is [C x H x W]; the feature
/// column of each lifted pixel becomes a row of the cloud features.
/// Throws GeometryError if no pixel is valid.
FeaturePointCloud unproject(const DepthMap& depth, const CameraIntrinsics& intr, const Tensor& features);
/// Same with depth given as a [1 x H x W] tensor; positions are differentiable
/// with respect to it. A non-finite depth raises NumericalError.
FeaturePointCloud unproject(const Tensor& depth, const CameraIntrinsics& intr, const Tensor& features);

/// Pixel coordinates (u, v) of a camera-frame point. Throws GeometryError if z <= 0.
std::array<double, 2> project_point(const std::array<double, 3>& p, const CameraIntrinsics& intr);

struct Projection {
  Tensor features;  // [C x H x W], zero where no point landed
  DepthMap depth;   // z of the point at its pixel, zero elsewhere
};

/// Scatters cloud features back onto the recorded source pixels of an
/// H x W image. Throws GeometryError if any z <= 0.
Projection project(const FeaturePointCloud& cloud, const CameraIntrinsics& intr, std::size_t height,
                   std::size_t width);

/// Centres on the centroid and divides by the largest distance from it.
/// A scale below 1e-12 is clamped to 1. Differentiable in the positions.
std::pair<FeaturePointCloud, NormalizationTransform> normalize_unit_ball(const FeaturePointCloud& cloud);

/// Inverse of normalize_unit_ball. Throws GeometryError if scale <= 0.
FeaturePointCloud denormalize(const FeaturePointCloud& cloud, const NormalizationTransform& transform);

}  // namespace decotr::geometry
