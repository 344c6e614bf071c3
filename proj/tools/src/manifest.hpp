#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace sfnn::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

/// Collects everything one invocation wrote so the manifest can list it.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path(const std::string& name) const { return root_ / name; }
  /// Writes `content` to root/name and records it.
  void write(const std::string& name, const std::string& content);
  /// Records a file produced by other code (checkpoints, ledgers).
  void record(const std::string& name);

  /// manifest.json: command, resolved config, dataset hash, version, timestamp, outputs.
  void write_manifest(const std::string& command, const nlohmann::ordered_json& config,
                      const nlohmann::ordered_json& dataset);

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

}  // namespace sfnn::cli
