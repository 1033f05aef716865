#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace tabb::cli {

struct RunOptions {
  std::filesystem::path out_dir;
  /// Directory that relative session paths in the config are resolved against.
  std::filesystem::path config_dir = ".";
  std::optional<unsigned> threads;
};

struct ArtifactEntry {
  std::string path;  ///< relative to the output directory
  std::size_t rows = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string started_at;
  std::string finished_at;
  std::vector<ArtifactEntry> files;
};

/// Runs one scenario, writes its artifacts and manifest.json into
/// opts.out_dir, and returns the manifest. Warnings go to stderr.
RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& opts);

/// Resolves the sessions path of a config relative to its directory.
std::filesystem::path resolve(const std::filesystem::path& config_dir, const std::string& path);

}  // namespace tabb::cli
