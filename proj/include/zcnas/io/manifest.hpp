#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace zc {

const char* toolkit_version();

// Everything needed to reproduce a run directory. Contains no timestamps.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // fully resolved
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name within the run directory -> sha256

  void add_input(const std::string& path);
  std::string json() const;
};

// Hashes every listed output in `dir`, then writes `dir`/manifest.json atomically.
void write_manifest(const std::string& dir, RunManifest m, const std::vector<std::string>& output_files);

}  // namespace zc
