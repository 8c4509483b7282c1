#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "adaptbases/common.hpp"
#include "adaptbases/sampler.hpp"

namespace adaptbases {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::string config_snapshot;  // resolved flat key=value text
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  double duration_seconds = 0.0;
  std::string parent_manifest_hash;  // lineage link, empty at pipeline roots
  std::string family;                // dataset family, recorded by cluster/fit
  std::vector<double> domain;        // xmin,ymin,xmax,ymax
};

inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a64(content);
}

inline std::string hash_file_hex(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)hash_file(path));
  return buf;
}

// Written atomically: serialized to a temp file, then renamed into place.
inline void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config_snapshot;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["duration_seconds"] = m.duration_seconds;
  j["parent_manifest_hash"] = m.parent_manifest_hash;
  j["family"] = m.family;
  j["domain"] = m.domain;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw validation_error("IoError", "cannot open " + tmp + " for writing");
    f << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  nlohmann::json j;
  f >> j;
  RunManifest m;
  m.command = j.value("command", "");
  m.config_snapshot = j.value("config", "");
  m.inputs = j.value("inputs", std::vector<std::string>{});
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.seed = j.value("seed", std::uint64_t(0));
  m.version = j.value("version", "");
  m.duration_seconds = j.value("duration_seconds", 0.0);
  m.parent_manifest_hash = j.value("parent_manifest_hash", "");
  m.family = j.value("family", "");
  m.domain = j.value("domain", std::vector<double>{});
  return m;
}

}  // namespace adaptbases
