#pragma once

#include <filesystem>
#include <iosfwd>

#include "decotr/tensor/tensor.hpp"

namespace decotr {

// Binary tensor file: magic "DTNS", u32 rank, rank x u32 dims, then the
// row-major f64 payload. All fields little-endian.

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace decotr
