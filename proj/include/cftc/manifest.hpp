#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cftc {

// Provenance record written into every command's output directory before
// the artifacts themselves.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // fully resolved settings
  std::map<std::string, std::string> inputs;  // path -> content hash
  std::vector<std::string> outputs;           // artifact paths (relative)
  std::uint64_t seed = 0;
};

std::string file_content_hash(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace cftc
