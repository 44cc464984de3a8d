#pragma once

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vsrpp::cli {

/// Git blob id (SHA-1 over "blob <size>\0" + content) of a file.
std::string git_blob_hash(const std::filesystem::path& path);

std::string utc_timestamp();

/// One JSON object per line, appended and never rewritten.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& argv);

  nlohmann::json& record() { return record_; }
  void append_to(const std::filesystem::path& path);

 private:
  nlohmann::json record_;
};

}  // namespace vsrpp::cli
