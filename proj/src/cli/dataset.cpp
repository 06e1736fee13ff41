#include "decotr/cli/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "decotr/errors.hpp"
#include "decotr/io/image_io.hpp"

namespace decotr::cli {
namespace {

constexpr std::string_view kDepthSuffix = ".depth.pfm";

}  // namespace

SceneFiles scene_files(const fs::path& dir, const std::string& name) {
  return {dir / (name + ".depth.pfm"), dir / (name + ".image.ppm"), dir / (name + ".intrinsics.json")};
}

std::string scene_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", index);
  return buf;
}

SceneFiles save_scene(const fs::path& dir, const training::Scene& scene) {
  const SceneFiles f = scene_files(dir, scene.name);
  io::save_pfm(f.depth, scene.depth);
  io::save_ppm(f.image, scene.image);
  io::save_intrinsics(f.intrinsics, scene.intrinsics);
  return f;
}

std::vector<training::Scene> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("data directory " + dir.string() + " does not exist");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (file.size() > kDepthSuffix.size() && file.ends_with(kDepthSuffix)) {
      names.push_back(file.substr(0, file.size() - kDepthSuffix.size()));
    }
  }
  if (names.empty()) throw IoError("no *.depth.pfm scenes in " + dir.string());
  std::sort(names.begin(), names.end());

  std::vector<training::Scene> scenes;
  for (const std::string& name : names) {
    const SceneFiles f = scene_files(dir, name);
    for (const fs::path& p : {f.image, f.intrinsics}) {
      if (!fs::exists(p)) throw IoError("scene " + name + " lacks " + p.string());
    }
    training::Scene s;
    s.name = name;
    s.depth = io::load_pfm(f.depth);
    s.image = io::load_ppm(f.image);
    s.intrinsics = io::load_intrinsics(f.intrinsics);
    if (s.image.dim(1) != s.depth.height || s.image.dim(2) != s.depth.width) {
      throw DimensionError("scene " + name + ": image " + shape_string(s.image.shape()) + " does not match depth " +
                           std::to_string(s.depth.height) + "x" + std::to_string(s.depth.width));
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace decotr::cli
