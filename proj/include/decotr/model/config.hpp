#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>

namespace decotr::model {

/// Architecture of the full pipeline. Serialized as JSON with the same field
/// names; missing fields keep their defaults, unknown fields are rejected.
struct ModelConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 40;
  /// Channel widths of f_1 .. f_5.
  std::array<std::size_t, 5> widths{16, 32, 64, 128, 128};
  /// Strides of the encoder stages producing f_2 .. f_5.
  std::array<std::size_t, 4> encoder_strides{2, 2, 2, 1};
  /// Channels of f_1 produced by the RGB branch; the depth branch gets the rest.
  std::size_t rgb_channels = 12;
  bool enhance_2d = true;
  std::size_t attention_heads = 2;
  bool use_3d = true;
  /// Guidance feature width C.
  std::size_t guidance_channels = 32;
  /// The guidance map and the point cloud live at 1/uplift_downscale resolution.
  std::size_t uplift_downscale = 4;
  std::size_t layers = 2;
  std::size_t neighbors = 16;
  bool normalize_points = true;
  bool global_attention = true;
  /// Points kept for global attention; 0 means N / 4.
  std::size_t global_points = 0;
  /// Whether the positional embedding also enters the aggregated values.
  bool delta_in_value = true;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  /// Spatial size of f_m for m = 1..5.
  std::array<std::size_t, 2> level_size(std::size_t m) const;
  /// Number of uplifted points (pixels of the guidance map).
  std::size_t point_count() const;

  /// Default toy configuration (32 x 40 input).
  static ModelConfig toy();
  /// Small configuration for gradient checks: 16 x 20 input, C = 8, L = 1, K = 4.
  static ModelConfig tiny();

  std::string to_json() const;
  /// Throws ConfigError on malformed JSON, unknown keys or invalid values.
  static ModelConfig from_json(const std::string& text);
  static ModelConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace decotr::model
