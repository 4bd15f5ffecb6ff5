#include "cftc/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "cftc/errors.hpp"
#include "cftc/hash.hpp"

namespace cftc {

std::string file_content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot hash missing file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return hash_hex(fnv1a_bytes(bytes.data(), bytes.size()));
}

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;

  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  j["timestamp"] = stamp;

  std::ofstream out(out_dir / "manifest.json");
  if (!out) {
    throw ParseError("cannot write manifest in: " + out_dir.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace cftc
