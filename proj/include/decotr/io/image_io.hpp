#pragma once

#include <filesystem>
#include <iosfwd>

#include "decotr/geometry/camera.hpp"
#include "decotr/tensor/tensor.hpp"

namespace decotr::io {

namespace fs = std::filesystem;

/// Single-channel PFM ("Pf"), little-endian (scale -1), rows stored bottom to
/// top. Values are narrowed to 32-bit floats on write.
void write_pfm(std::ostream& out, const geometry::DepthMap& depth);
geometry::DepthMap read_pfm(std::istream& in);
void save_pfm(const fs::path& path, const geometry::DepthMap& depth);
geometry::DepthMap load_pfm(const fs::path& path);

/// 16-bit binary PGM with a "# meters_per_unit <x>" comment; depth is
/// rounded to the nearest unit and clamped to 65535.
void write_pgm16(std::ostream& out, const geometry::DepthMap& depth, double meters_per_unit);
geometry::DepthMap read_pgm16(std::istream& in);
void save_pgm16(const fs::path& path, const geometry::DepthMap& depth, double meters_per_unit = 0.001);
geometry::DepthMap load_pgm16(const fs::path& path);

/// Binary 8-bit PPM of a [3 x H x W] image with values in [0, 1].
void write_ppm(std::ostream& out, const Tensor& image);
Tensor read_ppm(std::istream& in);
void save_ppm(const fs::path& path, const Tensor& image);
Tensor load_ppm(const fs::path& path);

/// JSON object with keys gamma_u, gamma_v, c_u, c_v.
void save_intrinsics(const fs::path& path, const geometry::CameraIntrinsics& intr);
geometry::CameraIntrinsics load_intrinsics(const fs::path& path);

}  // namespace decotr::io
