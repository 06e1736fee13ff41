#include "decotr/io/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "decotr/errors.hpp"

namespace decotr::io {
namespace {

static_assert(std::endian::native == std::endian::little, "image I/O assumes a little-endian host");

// Reads the next whitespace-separated header token, skipping '#' comments.
// Comments are passed to `on_comment` without the leading '#'.
template <typename OnComment>
std::string header_token(std::istream& in, OnComment on_comment) {
  std::string token;
  while (true) {
    const int c = in.peek();
    if (c == EOF) throw IoError("unexpected end of header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
      on_comment(line.substr(1));
    } else {
      break;
    }
  }
  while (in.peek() != EOF && !std::isspace(in.peek())) token.push_back(static_cast<char>(in.get()));
  return token;
}

std::string header_token(std::istream& in) {
  return header_token(in, [](const std::string&) {});
}

std::size_t positive_size(const std::string& token, const char* what) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &pos);
  } catch (const std::exception&) {
    throw IoError(std::string("bad ") + what + " '" + token + "'");
  }
  if (pos != token.size() || v <= 0) throw IoError(std::string("bad ") + what + " '" + token + "'");
  return static_cast<std::size_t>(v);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

template <typename Fn>
auto with_path(const fs::path& path, Fn fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_pfm(std::ostream& out, const geometry::DepthMap& depth) {
  depth.validate();
  out << "Pf\n" << depth.width << ' ' << depth.height << "\n-1.0\n";
  std::vector<float> row(depth.width);
  for (std::size_t r = depth.height; r-- > 0;) {
    for (std::size_t u = 0; u < depth.width; ++u) row[u] = static_cast<float>(depth.at(r, u));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing PFM data");
}

geometry::DepthMap read_pfm(std::istream& in) {
  if (header_token(in) != "Pf") throw IoError("not a single-channel PFM");
  const std::size_t width = positive_size(header_token(in), "PFM width");
  const std::size_t height = positive_size(header_token(in), "PFM height");
  const std::string scale_token = header_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw IoError("bad PFM scale '" + scale_token + "'");
  }
  if (!(scale < 0.0)) throw IoError("only little-endian PFM (negative scale) is supported");
  in.get();
  geometry::DepthMap depth = geometry::DepthMap::zeros(height, width);
  std::vector<float> row(width);
  for (std::size_t r = height; r-- > 0;) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width * sizeof(float)));
    if (!in) throw IoError("truncated PFM data");
    for (std::size_t u = 0; u < width; ++u) depth.at(r, u) = row[u];
  }
  return depth;
}

void save_pfm(const fs::path& path, const geometry::DepthMap& depth) {
  with_path(path, [&] {
    auto out = open_out(path);
    write_pfm(out, depth);
  });
}

geometry::DepthMap load_pfm(const fs::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    return read_pfm(in);
  });
}

void write_pgm16(std::ostream& out, const geometry::DepthMap& depth, double meters_per_unit) {
  depth.validate();
  if (!(meters_per_unit > 0.0)) throw IoError("meters_per_unit must be positive");
  std::ostringstream unit;
  unit.precision(17);
  unit << meters_per_unit;
  out << "P5\n# meters_per_unit " << unit.str() << '\n' << depth.width << ' ' << depth.height << "\n65535\n";
  for (double d : depth.values) {
    const double units = std::min(std::round(d / meters_per_unit), 65535.0);
    const auto q = static_cast<std::uint16_t>(units);
    const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8), static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  if (!out) throw IoError("failed writing PGM data");
}

geometry::DepthMap read_pgm16(std::istream& in) {
  double meters_per_unit = 0.0;
  const auto comment = [&](const std::string& text) {
    std::istringstream is(text);
    std::string key;
    double value = 0.0;
    if (is >> key >> value && key == "meters_per_unit") meters_per_unit = value;
  };
  if (header_token(in, comment) != "P5") throw IoError("not a binary PGM");
  const std::size_t width = positive_size(header_token(in, comment), "PGM width");
  const std::size_t height = positive_size(header_token(in, comment), "PGM height");
  if (header_token(in, comment) != "65535") throw IoError("only 16-bit PGM is supported");
  in.get();
  if (!(meters_per_unit > 0.0)) throw IoError("PGM lacks a meters_per_unit comment");
  geometry::DepthMap depth = geometry::DepthMap::zeros(height, width);
  for (double& d : depth.values) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    if (!in) throw IoError("truncated PGM data");
    d = static_cast<double>((bytes[0] << 8) | bytes[1]) * meters_per_unit;
  }
  return depth;
}

void save_pgm16(const fs::path& path, const geometry::DepthMap& depth, double meters_per_unit) {
  with_path(path, [&] {
    auto out = open_out(path);
    write_pgm16(out, depth, meters_per_unit);
  });
}

geometry::DepthMap load_pgm16(const fs::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    return read_pgm16(in);
  });
}

void write_ppm(std::ostream& out, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("PPM image must be [3 x H x W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  const auto data = image.data();
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> bytes(3 * w * h);
  for (std::size_t p = 0; p < w * h; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(data[c * w * h + p], 0.0, 1.0);
      bytes[3 * p + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing PPM data");
}

Tensor read_ppm(std::istream& in) {
  if (header_token(in) != "P6") throw IoError("not a binary PPM");
  const std::size_t w = positive_size(header_token(in), "PPM width");
  const std::size_t h = positive_size(header_token(in), "PPM height");
  if (header_token(in) != "255") throw IoError("only 8-bit PPM is supported");
  in.get();
  std::vector<unsigned char> bytes(3 * w * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("truncated PPM data");
  std::vector<double> data(3 * w * h);
  for (std::size_t p = 0; p < w * h; ++p) {
    for (std::size_t c = 0; c < 3; ++c) data[c * w * h + p] = bytes[3 * p + c] / 255.0;
  }
  return Tensor::from_data({3, h, w}, std::move(data));
}

void save_ppm(const fs::path& path, const Tensor& image) {
  with_path(path, [&] {
    auto out = open_out(path);
    write_ppm(out, image);
  });
}

Tensor load_ppm(const fs::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    return read_ppm(in);
  });
}

void save_intrinsics(const fs::path& path, const geometry::CameraIntrinsics& intr) {
  nlohmann::ordered_json j;
  j["gamma_u"] = intr.gamma_u;
  j["gamma_v"] = intr.gamma_v;
  j["c_u"] = intr.c_u;
  j["c_v"] = intr.c_v;
  with_path(path, [&] {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed");
  });
}

geometry::CameraIntrinsics load_intrinsics(const fs::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    nlohmann::json j;
    try {
      in >> j;
      geometry::CameraIntrinsics intr{j.at("gamma_u").get<double>(), j.at("gamma_v").get<double>(),
                                      j.at("c_u").get<double>(), j.at("c_v").get<double>()};
      intr.validate();
      return intr;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("bad intrinsics JSON: ") + e.what());
    } catch (const GeometryError& e) {
      throw IoError(std::string("bad intrinsics: ") + e.what());
    }
  });
}

}  // namespace decotr::io
