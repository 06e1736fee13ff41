#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace decotr::cli {

namespace fs = std::filesystem;

/// SHA-1 of "blob <size>\0" + content, the object id git gives the same bytes.
std::string git_blob_sha1(std::string_view content);
/// Blob hash of a file's bytes. Throws IoError if it cannot be read.
std::string file_blob_sha1(const fs::path& path);

struct FileRecord {
  std::string path;  // relative to the directory recorded in the manifest paths
  std::string sha1;
  std::uintmax_t bytes = 0;
};

/// Record of inputs, outputs and settings written once per command run.
class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed);

  void set_argument(const std::string& name, nlohmann::ordered_json value);
  /// Where a file or directory came from or went; recorded but not hashed.
  void set_path(const std::string& name, const fs::path& value);
  void set_config(nlohmann::ordered_json config);
  /// Hashes `file` now; `label` is the path stored in the manifest.
  void add_input(const fs::path& file, const std::string& label);
  void add_output(const fs::path& file, const std::string& label);
  void set_result(const std::string& name, nlohmann::ordered_json value);

  /// SHA-1 over the command, seed, arguments, config and every input and
  /// output hash. Paths and timestamps are left out, so reruns with equal
  /// results share it wherever they write.
  std::string content_hash() const;

  /// Stamps the finish time.
  nlohmann::ordered_json to_json() const;
  void write(const fs::path& path) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string started_;
  nlohmann::ordered_json arguments_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json paths_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json config_;
  nlohmann::ordered_json results_ = nlohmann::ordered_json::object();
  std::vector<FileRecord> inputs_;
  std::vector<FileRecord> outputs_;
};

}  // namespace decotr::cli
