#include "decotr/model/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "decotr/errors.hpp"

namespace decotr::model {
namespace {

using nlohmann::ordered_json;

bool power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::string size_string(const std::array<std::size_t, 2>& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]);
}

std::size_t count(const std::string& key, const ordered_json& value) {
  if (!value.is_number_unsigned()) throw ConfigError(key + " must be a non-negative integer");
  return value.get<std::size_t>();
}

template <std::size_t N>
std::array<std::size_t, N> counts(const std::string& key, const ordered_json& value) {
  if (!value.is_array() || value.size() != N) {
    throw ConfigError(key + " must be an array of " + std::to_string(N) + " integers");
  }
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = count(key, value[i]);
  return out;
}

}  // namespace

std::array<std::size_t, 2> ModelConfig::level_size(std::size_t m) const {
  if (m < 1 || m > 5) throw ContractError("level must be in 1..5");
  std::array<std::size_t, 2> s{image_height, image_width};
  for (std::size_t k = 2; k <= m; ++k) {
    const std::size_t stride = encoder_strides[k - 2];
    s = {s[0] / stride, s[1] / stride};
  }
  return s;
}

std::size_t ModelConfig::point_count() const {
  return (image_height / uplift_downscale) * (image_width / uplift_downscale);
}

void ModelConfig::validate() const {
  if (image_height == 0 || image_width == 0) throw ConfigError("image size must be positive");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("channel widths must be positive");
  }
  if (rgb_channels == 0 || rgb_channels >= widths[0]) {
    throw ConfigError("rgb_channels must leave at least one f_1 channel for the depth branch");
  }
  std::size_t h = image_height;
  std::size_t w = image_width;
  for (std::size_t s : encoder_strides) {
    if (s == 0) throw ConfigError("encoder strides must be positive");
    if (h % s != 0 || w % s != 0) {
      throw ConfigError("encoder strides do not divide the image size " + std::to_string(image_height) + "x" +
                        std::to_string(image_width));
    }
    h /= s;
    w /= s;
  }
  if (enhance_2d) {
    if (attention_heads == 0 || widths[4] % attention_heads != 0) {
      throw ConfigError("attention_heads must divide the f_5 width " + std::to_string(widths[4]));
    }
    const auto smallest = level_size(5);
    for (std::size_t m = 2; m <= 4; ++m) {
      const auto s = level_size(m);
      if (s[0] % smallest[0] != 0 || s[0] / smallest[0] != s[1] / smallest[1] || s[1] % smallest[1] != 0 ||
          !power_of_two(s[0] / smallest[0])) {
        throw ConfigError("f_" + std::to_string(m) + " (" + size_string(s) + ") cannot be reduced to " +
                          size_string(smallest) + " by factor-2 steps");
      }
    }
  }
  if (use_3d) {
    if (guidance_channels == 0) throw ConfigError("guidance_channels must be positive");
    if (uplift_downscale == 0 || image_height % uplift_downscale != 0 || image_width % uplift_downscale != 0) {
      throw ConfigError("uplift_downscale must divide the image size");
    }
    const std::array<std::size_t, 2> g{image_height / uplift_downscale, image_width / uplift_downscale};
    bool found = false;
    for (std::size_t m = 1; m <= 4; ++m) found = found || level_size(m) == g;
    if (!found) throw ConfigError("no decoder level has the guidance size " + size_string(g));
    if (layers == 0) throw ConfigError("layers must be at least 1");
    const std::size_t n = point_count();
    if (neighbors == 0 || neighbors >= n) {
      throw ConfigError("neighbors must be in 1.." + std::to_string(n - 1) + " for " + std::to_string(n) + " points");
    }
    if (global_attention) {
      const std::size_t m = global_points == 0 ? std::max<std::size_t>(2, n / 4) : global_points;
      if (m < 2 || m > n) throw ConfigError("global_points must be in 2.." + std::to_string(n));
    }
  }
}

ModelConfig ModelConfig::toy() { return {}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.image_height = 16;
  c.image_width = 20;
  c.widths = {6, 8, 8, 8, 8};
  c.encoder_strides = {2, 2, 1, 1};
  c.rgb_channels = 4;
  c.guidance_channels = 8;
  c.layers = 1;
  c.neighbors = 4;
  return c;
}

std::string ModelConfig::to_json() const {
  ordered_json j;
  j["image_height"] = image_height;
  j["image_width"] = image_width;
  j["widths"] = widths;
  j["encoder_strides"] = encoder_strides;
  j["rgb_channels"] = rgb_channels;
  j["enhance_2d"] = enhance_2d;
  j["attention_heads"] = attention_heads;
  j["use_3d"] = use_3d;
  j["guidance_channels"] = guidance_channels;
  j["uplift_downscale"] = uplift_downscale;
  j["layers"] = layers;
  j["neighbors"] = neighbors;
  j["normalize_points"] = normalize_points;
  j["global_attention"] = global_attention;
  j["global_points"] = global_points;
  j["delta_in_value"] = delta_in_value;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const ordered_json j = ordered_json::parse(text);
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "image_height") c.image_height = count(key, value);
      else if (key == "image_width") c.image_width = count(key, value);
      else if (key == "widths") c.widths = counts<5>(key, value);
      else if (key == "encoder_strides") c.encoder_strides = counts<4>(key, value);
      else if (key == "rgb_channels") c.rgb_channels = count(key, value);
      else if (key == "enhance_2d") c.enhance_2d = value.get<bool>();
      else if (key == "attention_heads") c.attention_heads = count(key, value);
      else if (key == "use_3d") c.use_3d = value.get<bool>();
      else if (key == "guidance_channels") c.guidance_channels = count(key, value);
      else if (key == "uplift_downscale") c.uplift_downscale = count(key, value);
      else if (key == "layers") c.layers = count(key, value);
      else if (key == "neighbors") c.neighbors = count(key, value);
      else if (key == "normalize_points") c.normalize_points = value.get<bool>();
      else if (key == "global_attention") c.global_attention = value.get<bool>();
      else if (key == "global_points") c.global_points = count(key, value);
      else if (key == "delta_in_value") c.delta_in_value = value.get<bool>();
      else throw ConfigError("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ModelConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << to_json();
  if (!out) throw IoError("cannot write model config " + path.string());
}

}  // namespace decotr::model
