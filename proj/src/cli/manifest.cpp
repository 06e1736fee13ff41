#include "decotr/cli/manifest.hpp"

#include <openssl/sha.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "decotr/errors.hpp"

namespace decotr::cli {
namespace {

std::string hex(const unsigned char* digest, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = kDigits[digest[i] >> 4];
    out[2 * i + 1] = kDigits[digest[i] & 15];
  }
  return out;
}

std::string sha1(std::string_view bytes) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  return hex(digest, SHA_DIGEST_LENGTH);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

FileRecord record(const fs::path& file, const std::string& label) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return {label, git_blob_sha1(bytes), bytes.size()};
}

nlohmann::ordered_json files_json(const std::vector<FileRecord>& files) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const FileRecord& f : files) out.push_back({{"path", f.path}, {"sha1", f.sha1}, {"bytes", f.bytes}});
  return out;
}

}  // namespace

std::string git_blob_sha1(std::string_view content) {
  std::string framed = "blob " + std::to_string(content.size());
  framed.push_back('\0');
  framed.append(content);
  return sha1(framed);
}

std::string file_blob_sha1(const fs::path& path) { return record(path, path.string()).sha1; }

Manifest::Manifest(std::string command, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), started_(utc_now()) {}

void Manifest::set_argument(const std::string& name, nlohmann::ordered_json value) { arguments_[name] = std::move(value); }

void Manifest::set_path(const std::string& name, const fs::path& value) { paths_[name] = value.generic_string(); }

void Manifest::set_config(nlohmann::ordered_json config) { config_ = std::move(config); }

void Manifest::add_input(const fs::path& file, const std::string& label) { inputs_.push_back(record(file, label)); }

void Manifest::add_output(const fs::path& file, const std::string& label) { outputs_.push_back(record(file, label)); }

void Manifest::set_result(const std::string& name, nlohmann::ordered_json value) { results_[name] = std::move(value); }

std::string Manifest::content_hash() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["seed"] = seed_;
  j["arguments"] = arguments_;
  j["config"] = config_;
  j["inputs"] = files_json(inputs_);
  j["outputs"] = files_json(outputs_);
  return sha1(j.dump());
}

nlohmann::ordered_json Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["seed"] = seed_;
  j["arguments"] = arguments_;
  j["paths"] = paths_;
  if (!config_.is_null()) j["config"] = config_;
  j["inputs"] = files_json(inputs_);
  j["outputs"] = files_json(outputs_);
  if (!results_.empty()) j["results"] = results_;
  j["content_hash"] = content_hash();
  j["started_at"] = started_;
  j["finished_at"] = utc_now();
  return j;
}

void Manifest::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace decotr::cli
