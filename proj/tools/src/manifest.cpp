#include "manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "sfnn/error.hpp"

#ifndef SFNN_VERSION
#define SFNN_VERSION "unknown"
#endif

namespace sfnn::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": no such file or unreadable");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char text[32];
  std::strftime(text, sizeof text, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return text;
}

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
}

void OutputDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(path(name), std::ios::binary);
  if (!out || !(out << content)) throw IoError("cannot write " + path(name).string());
  record(name);
}

void OutputDir::record(const std::string& name) {
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputDir::write_manifest(const std::string& command, const nlohmann::ordered_json& config,
                               const nlohmann::ordered_json& dataset) {
  nlohmann::ordered_json m;
  m["tool"] = "sfnn";
  m["version"] = SFNN_VERSION;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = sha256_hex(config.dump());
  m["dataset"] = dataset;
  m["timestamp"] = utc_timestamp();
  auto outputs = nlohmann::ordered_json::array();
  for (const auto& f : files_) {
    outputs.push_back({{"file", f}, {"sha256", sha256_file(path(f))}});
  }
  m["outputs"] = outputs;
  std::ofstream out(path("manifest.json"));
  if (!out || !(out << m.dump(2) << '\n')) throw IoError("cannot write " + path("manifest.json").string());
}

}  // namespace sfnn::cli
