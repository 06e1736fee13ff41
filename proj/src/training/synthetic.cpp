#include "decotr/training/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "decotr/errors.hpp"

namespace decotr::training {
namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot(a, a));
  return {a[0] / n, a[1] / n, a[2] / n};
}

Vec3 ray(const geometry::CameraIntrinsics& intr, double u, double v) {
  return {(u - intr.c_u) / intr.gamma_u, (v - intr.c_v) / intr.gamma_v, 1.0};
}

// Smallest positive ray parameter (equal to z since the ray has unit z).
double sphere_depth(const Sphere& s, const Vec3& d) {
  const double a = dot(d, d);
  const double b = dot(d, s.centre);
  const double c = dot(s.centre, s.centre) - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return -1.0;
  const double root = std::sqrt(disc);
  const double t0 = (b - root) / a;
  return t0 > 0.0 ? t0 : (b + root) / a;
}

}  // namespace

geometry::CameraIntrinsics synthetic_intrinsics(std::size_t height, std::size_t width) {
  const double gamma = 0.9 * static_cast<double>(width);
  return {gamma, gamma, (static_cast<double>(width) - 1.0) / 2.0, (static_cast<double>(height) - 1.0) / 2.0};
}

double plane_depth(const Plane& plane, const geometry::CameraIntrinsics& intr, double u, double v) {
  const double denom = dot(plane.normal, ray(intr, u, v));
  if (denom == 0.0) return -1.0;
  return plane.offset / denom;
}

SyntheticScene make_synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width) {
  if (height < 16 || width < 16) throw ContractError("synthetic scenes need at least 16x16 pixels");
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SyntheticScene s;
  s.seed = seed;
  s.name = "scene_" + std::to_string(seed);
  s.intrinsics = synthetic_intrinsics(height, width);

  const Vec3 wall_normal = normalized({uniform(-0.15, 0.15), uniform(-0.15, 0.15), 1.0});
  const double wall_z = uniform(5.0, 8.0);
  s.planes.push_back({wall_normal, wall_z * wall_normal[2]});
  s.planes.push_back({{0.0, 1.0, 0.0}, uniform(0.9, 1.6)});
  const int sphere_count = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int i = 0; i < sphere_count; ++i) {
    const double z = uniform(2.0, 4.5);
    s.spheres.push_back({{uniform(-0.35, 0.35) * z, uniform(-0.25, 0.25) * z, z}, uniform(0.4, 0.9)});
  }
  const std::size_t objects = s.planes.size() + s.spheres.size();
  std::vector<Vec3> albedo(objects);
  for (auto& a : albedo) a = {uniform(0.3, 1.0), uniform(0.3, 1.0), uniform(0.3, 1.0)};
  const Vec3 light = normalized({-0.3, -0.5, -1.0});

  s.depth = geometry::DepthMap::zeros(height, width);
  s.object_id.assign(height * width, -1);
  const std::size_t plane_pixels = height * width;
  std::vector<double> rgb(3 * plane_pixels);
  for (std::size_t v = 0; v < height; ++v) {
    for (std::size_t u = 0; u < width; ++u) {
      const Vec3 d = ray(s.intrinsics, static_cast<double>(u), static_cast<double>(v));
      double best = std::numeric_limits<double>::infinity();
      int id = -1;
      for (std::size_t p = 0; p < s.planes.size(); ++p) {
        const double z = plane_depth(s.planes[p], s.intrinsics, static_cast<double>(u), static_cast<double>(v));
        if (z > 0.0 && z < best) {
          best = z;
          id = static_cast<int>(p);
        }
      }
      for (std::size_t k = 0; k < s.spheres.size(); ++k) {
        const double z = sphere_depth(s.spheres[k], d);
        if (z > 0.0 && z < best) {
          best = z;
          id = static_cast<int>(s.planes.size() + k);
        }
      }
      const std::size_t i = v * width + u;
      s.depth.values[i] = best;
      s.object_id[i] = id;
      const Vec3 hit{d[0] * best, d[1] * best, best};
      Vec3 normal;
      double texture = 1.0;
      if (id < static_cast<int>(s.planes.size())) {
        normal = s.planes[static_cast<std::size_t>(id)].normal;
        const long cell = static_cast<long>(std::floor(hit[0] / 0.5)) + static_cast<long>(std::floor(hit[1] / 0.5)) +
                          static_cast<long>(std::floor(hit[2] / 0.5));
        texture = (cell & 1) ? 0.8 : 1.0;
      } else {
        const Sphere& sp = s.spheres[static_cast<std::size_t>(id) - s.planes.size()];
        normal = {(hit[0] - sp.centre[0]) / sp.radius, (hit[1] - sp.centre[1]) / sp.radius,
                  (hit[2] - sp.centre[2]) / sp.radius};
      }
      const double lambert = std::fabs(dot(normal, light));
      const double shade = (0.25 + 0.75 * lambert) * texture / (1.0 + 0.12 * best);
      for (std::size_t c = 0; c < 3; ++c) {
        rgb[c * plane_pixels + i] = std::clamp(albedo[static_cast<std::size_t>(id)][c] * shade, 0.0, 1.0);
      }
    }
  }
  s.image = Tensor::from_data({3, height, width}, std::move(rgb));
  return s;
}

std::vector<Scene> make_synthetic_dataset(std::uint64_t first_seed, std::size_t count, std::size_t height,
                                          std::size_t width) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) scenes.push_back(make_synthetic_scene(first_seed + i, height, width));
  return scenes;
}

}  // namespace decotr::training
