#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bcrb::cli {

inline const std::vector<std::string> kKinds{"bound",   "optimal",  "minimax",   "quantum",
                                             "waveform", "imaging", "invariance"};

struct RunOptions {
  int grid_scale = 1;
  std::uint64_t seed = 1;
};

struct OutputFile {
  std::string name;
  std::string contents;
};

struct ScenarioResult {
  json results;
  std::vector<OutputFile> files;
  /// Referenced input files (as written in the config) and their SHA-256.
  std::map<std::string, std::string> inputs;
};

/// Runs one scenario.  `base_dir` resolves relative CSV paths.  Throws
/// ConfigError for schema problems and other bcrb::Error for numerical ones.
ScenarioResult run_scenario(const std::string& kind, const json& config,
                            const std::filesystem::path& base_dir, const RunOptions& options);

/// report.json contents: results plus the embedded config and its hash.
std::string build_report(const std::string& kind, const json& config, const RunOptions& options,
                         const ScenarioResult& result);

}  // namespace bcrb::cli
