#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "decotr/geometry/camera.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::training {

/// An aligned RGB image, dense ground-truth depth and camera.
struct Scene {
  std::string name;
  Tensor image;  // [3 x H x W] in [0, 1]
  geometry::DepthMap depth;
  geometry::CameraIntrinsics intrinsics;
};

/// Plane {X : normal . X = offset} in camera coordinates.
struct Plane {
  std::array<double, 3> normal;
  double offset;
};

struct Sphere {
  std::array<double, 3> centre;
  double radius;
};

/// Ray-cast scene of a back wall, a floor and up to two spheres.
/// object_id per pixel: 0 wall, 1 floor, 2 + i sphere i.
struct SyntheticScene : Scene {
  std::uint64_t seed = 0;
  std::vector<Plane> planes;
  std::vector<Sphere> spheres;
  std::vector<int> object_id;
};

inline constexpr double kSceneMinDepth = 0.5;
inline constexpr double kSceneMaxDepth = 10.0;

/// Camera used for every synthetic scene: gamma = 0.9 W, principal point at
/// the image centre.
geometry::CameraIntrinsics synthetic_intrinsics(std::size_t height, std::size_t width);

/// Deterministic per seed. Requires H, W >= 16 (ContractError otherwise).
SyntheticScene make_synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width);

/// Depth along the optical axis where the ray through pixel (u, v) meets the
/// plane, or a non-positive value if it does not.
double plane_depth(const Plane& plane, const geometry::CameraIntrinsics& intr, double u, double v);

/// Scenes with seeds first_seed .. first_seed + count - 1.
std::vector<Scene> make_synthetic_dataset(std::uint64_t first_seed, std::size_t count, std::size_t height,
                                          std::size_t width);

}  // namespace decotr::training
