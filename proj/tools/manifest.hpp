#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mollify::cli {

/// Everything needed to re-run a command: the exact argument list plus the
/// configuration it resolved to.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // without the program name
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  nlohmann::json summary = nlohmann::json::object();
};

std::string_view artifact_version() noexcept;

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// `<out>.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& out);

}  // namespace mollify::cli
