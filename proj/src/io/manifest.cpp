#include "zcnas/io/manifest.hpp"

#include <filesystem>
#include <json.hpp>

#include "zcnas/io/files.hpp"

namespace zc {

const char* toolkit_version() { return "0.1.0"; }

void RunManifest::add_input(const std::string& path) { inputs[path] = file_sha256(path); }

std::string RunManifest::json() const {
  nlohmann::ordered_json j;
  j["format"] = "zcnas-manifest";
  j["version"] = toolkit_version();
  j["command"] = command;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = seeds;
  nlohmann::ordered_json in = nlohmann::ordered_json::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  j["inputs"] = in;
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [k, v] : outputs) out[k] = v;
  j["outputs"] = out;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& dir, RunManifest m, const std::vector<std::string>& output_files) {
  for (const auto& f : output_files) m.outputs[f] = file_sha256((std::filesystem::path(dir) / f).string());
  write_file_atomic((std::filesystem::path(dir) / "manifest.json").string(), m.json());
}

}  // namespace zc
