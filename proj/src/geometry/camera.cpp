#include "decotr/geometry/camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "decotr/errors.hpp"

namespace decotr::geometry {

void CameraIntrinsics::validate() const {
  if (!(gamma_u > 0.0) || !(gamma_v > 0.0) || !std::isfinite(gamma_u) || !std::isfinite(gamma_v)) {
    throw GeometryError("focal lengths must be positive and finite");
  }
  if (!std::isfinite(c_u) || !std::isfinite(c_v)) throw GeometryError("principal point must be finite");
}

CameraIntrinsics CameraIntrinsics::downscaled(std::size_t factor) const {
  if (factor == 0) throw ContractError("downscale factor must be positive");
  const double f = static_cast<double>(factor);
  return {gamma_u / f, gamma_v / f, (c_u + 0.5) / f - 0.5, (c_v + 0.5) / f - 0.5};
}

DepthMap DepthMap::zeros(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DimensionError("depth map dimensions must be positive");
  return {height, width, std::vector<double>(height * width, 0.0)};
}

DepthMap DepthMap::from_tensor(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() == 3 && s[0] == 1) return {s[1], s[2], {t.data().begin(), t.data().end()}};
  if (s.size() == 2) return {s[0], s[1], {t.data().begin(), t.data().end()}};
  throw DimensionError("depth tensor must be [1 x H x W] or [H x W], got " + shape_string(s));
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double d) { return d > 0.0; }));
}

Tensor DepthMap::to_tensor() const { return Tensor::from_data({1, height, width}, values); }

void DepthMap::validate() const {
  if (height == 0 || width == 0 || values.size() != height * width) {
    throw DimensionError("depth map holds " + std::to_string(values.size()) + " values for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  for (double d : values) {
    if (!std::isfinite(d) || d < 0.0) throw DomainError("depth values must be finite and non-negative");
  }
}

DepthMap average_pool_valid(const DepthMap& depth, std::size_t factor) {
  if (factor == 0 || depth.height % factor != 0 || depth.width % factor != 0) {
    throw DimensionError("depth map " + std::to_string(depth.height) + "x" + std::to_string(depth.width) +
                         " is not divisible by " + std::to_string(factor));
  }
  DepthMap out = DepthMap::zeros(depth.height / factor, depth.width / factor);
  for (std::size_t v = 0; v < out.height; ++v) {
    for (std::size_t u = 0; u < out.width; ++u) {
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t dv = 0; dv < factor; ++dv) {
        for (std::size_t du = 0; du < factor; ++du) {
          const double d = depth.at(v * factor + dv, u * factor + du);
          if (d > 0.0) {
            total += d;
            ++count;
          }
        }
      }
      out.at(v, u) = count ? total / static_cast<double>(count) : 0.0;
    }
  }
  return out;
}

}  // namespace decotr::geometry
