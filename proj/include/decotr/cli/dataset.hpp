#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "decotr/training/synthetic.hpp"

namespace decotr::cli {

namespace fs = std::filesystem;

/// On-disk scene: <name>.depth.pfm, <name>.image.ppm, <name>.intrinsics.json.
struct SceneFiles {
  fs::path depth;
  fs::path image;
  fs::path intrinsics;
};

SceneFiles scene_files(const fs::path& dir, const std::string& name);

/// "scene_0000", "scene_0001", ...
std::string scene_name(std::size_t index);

/// Writes the three files of a scene and returns their paths.
SceneFiles save_scene(const fs::path& dir, const training::Scene& scene);

/// Every scene in `dir`, ordered by name. A scene is any *.depth.pfm with its
/// two companions. Throws IoError if the directory holds no complete scene or
/// a companion file is missing.
std::vector<training::Scene> load_dataset(const fs::path& dir);

}  // namespace decotr::cli
