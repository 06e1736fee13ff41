#include "decotr/geometry/point_cloud.hpp"

#include <cmath>
#include <string>

#include "decotr/errors.hpp"
#include "decotr/tensor/ops.hpp"

namespace decotr::geometry {

std::array<double, 3> FeaturePointCloud::position(std::size_t i) const {
  const auto p = positions.data();
  return {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
}

FeaturePointCloud unproject(const DepthMap& depth, const CameraIntrinsics& intr, const Tensor& features) {
  depth.validate();
  return unproject(depth.to_tensor(), intr, features);
}

FeaturePointCloud unproject(const Tensor& depth, const CameraIntrinsics& intr, const Tensor& features) {
  intr.validate();
  if (depth.rank() != 3 || depth.dim(0) != 1) {
    throw DimensionError("depth must be [1 x H x W], got " + shape_string(depth.shape()));
  }
  const std::size_t height = depth.dim(1);
  const std::size_t width = depth.dim(2);
  if (features.rank() != 3 || features.dim(1) != height || features.dim(2) != width) {
    throw DimensionError("features " + shape_string(features.shape()) + " do not match depth " +
                         shape_string(depth.shape()));
  }
  FeaturePointCloud cloud;
  cloud.image_height = height;
  cloud.image_width = width;
  // Per-point ray (x/z, y/z, 1); positions are depth times ray.
  std::vector<double> rays;
  std::vector<std::size_t> rows;
  const auto d = depth.data();
  for (std::size_t v = 0; v < height; ++v) {
    for (std::size_t u = 0; u < width; ++u) {
      const double z = d[v * width + u];
      // A predicted depth can diverge; a negative one is a caller bug.
      if (!std::isfinite(z)) throw NumericalError("non-finite depth at pixel (" + std::to_string(u) + ", " +
                                                  std::to_string(v) + ")");
      if (z < 0.0) throw DomainError("depth values must be non-negative");
      if (z == 0.0) continue;
      rays.push_back((static_cast<double>(u) - intr.c_u) / intr.gamma_u);
      rays.push_back((static_cast<double>(v) - intr.c_v) / intr.gamma_v);
      rays.push_back(1.0);
      cloud.pixels.push_back({u, v});
      rows.push_back(v * width + u);
    }
  }
  if (rows.empty()) throw GeometryError("depth map has no valid pixel to unproject");
  const std::size_t n = rows.size();
  const Tensor point_depth = gather_rows(reshape(depth, {height * width, 1}), rows);
  cloud.positions = matmul(point_depth, Tensor::full({1, 3}, 1.0)) * Tensor::from_data({n, 3}, std::move(rays));
  const std::size_t channels = features.dim(0);
  const Tensor per_pixel = transpose(reshape(features, {channels, height * width}));
  cloud.features = gather_rows(per_pixel, rows);
  return cloud;
}

std::array<double, 2> project_point(const std::array<double, 3>& p, const CameraIntrinsics& intr) {
  if (!(p[2] > 0.0)) throw GeometryError("cannot project a point with z <= 0");
  return {intr.gamma_u * p[0] / p[2] + intr.c_u, intr.gamma_v * p[1] / p[2] + intr.c_v};
}

Projection project(const FeaturePointCloud& cloud, const CameraIntrinsics& intr, std::size_t height,
                   std::size_t width) {
  intr.validate();
  const std::size_t n = cloud.size();
  if (cloud.positions.dim(0) != n || cloud.features.dim(0) != n) {
    throw DimensionError("point cloud arrays disagree on the point count");
  }
  Projection out{Tensor(), DepthMap::zeros(height, width)};
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = cloud.position(i);
    if (!(p[2] > 0.0)) throw GeometryError("point " + std::to_string(i) + " has z <= 0");
    const PixelIndex px = cloud.pixels[i];
    if (px.u >= width || px.v >= height) throw IndexError("point " + std::to_string(i) + " lies outside the image");
    rows[i] = px.v * width + px.u;
    out.depth.at(px.v, px.u) = p[2];
  }
  const std::size_t channels = cloud.features.dim(1);
  out.features = reshape(transpose(scatter_rows(cloud.features, rows, height * width)), {channels, height, width});
  return out;
}

std::pair<FeaturePointCloud, NormalizationTransform> normalize_unit_ball(const FeaturePointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ContractError("cannot normalize an empty cloud");
  const Tensor centroid = matmul(Tensor::full({1, n}, 1.0 / static_cast<double>(n)), cloud.positions);
  const Tensor centred = cloud.positions - matmul(Tensor::full({n, 1}, 1.0), centroid);
  const Tensor radius = sqrt(max(sum(centred * centred, 1)));
  NormalizationTransform t;
  for (std::size_t a = 0; a < 3; ++a) t.centroid[a] = centroid.data()[a];
  FeaturePointCloud out = cloud;
  if (radius.item() < 1e-12) {
    t.scale = 1.0;
    out.positions = centred;
  } else {
    t.scale = radius.item();
    out.positions = centred / radius;
  }
  return {std::move(out), t};
}

FeaturePointCloud denormalize(const FeaturePointCloud& cloud, const NormalizationTransform& transform) {
  if (!(transform.scale > 0.0)) throw GeometryError("normalization scale must be positive");
  const std::size_t n = cloud.size();
  std::vector<double> p(cloud.positions.data().begin(), cloud.positions.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < 3; ++a) p[3 * i + a] = p[3 * i + a] * transform.scale + transform.centroid[a];
  }
  FeaturePointCloud out = cloud;
  out.positions = Tensor::from_data({n, 3}, std::move(p));
  return out;
}

}  // namespace decotr::geometry
