#include "manifest.hpp"

#include <fstream>

#include "mollify/error.hpp"
#include "mollify/model_io.hpp"
#include "mollify/sampling.hpp"

namespace mollify::cli {

using nlohmann::json;

std::string_view artifact_version() noexcept { return MOLLIFY_VERSION; }

json manifest_to_json(const RunManifest& m) {
  json j;
  j["artifact"] = "mollify";
  j["version"] = std::string(artifact_version());
  j["prng"] = kPrngName;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["outputs"] = m.outputs;
  j["summary"] = m.summary;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.config = j.value("config", json::object());
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.summary = j.value("summary", json::object());
    return m;
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << manifest_to_json(m).dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigInvalid("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

}  // namespace mollify::cli
