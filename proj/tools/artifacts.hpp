#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fedtox/config.hpp"

namespace fedtox::cli {

namespace fs = std::filesystem;

/// Stage output directories live side by side under the work directory.
fs::path stage_dir(const RunConfig& config, Stage stage);

std::string read_file(const fs::path& path);  // throws ParseError
void write_file(const fs::path& path, const std::string& content);
std::string file_digest(const fs::path& path);

/// Filesystem-safe stem for an instance id.
std::string file_stem(const std::string& instance);

/// Deterministic record of one stage run; written last, next to the outputs.
struct Manifest {
  Stage stage = Stage::Synth;
  fs::path dir;  // where manifest.json goes
  std::string config_hash;
  std::map<std::string, std::string> upstream;  // stage name -> config hash
  std::vector<fs::path> inputs;                 // absolute or workdir-relative
  std::vector<fs::path> outputs;
};

void write_manifest(const RunConfig& config, const Manifest& manifest);

/// Throws ParseError when the stage has not been run and ConfigError when it
/// was run under a different configuration. Returns the recorded hash.
std::string require_stage(const RunConfig& config, Stage stage);
std::string require_manifest(const fs::path& dir, Stage stage, const std::string& expected_hash);

/// Instance id -> file stem, as recorded by the stage that wrote per-instance files.
std::map<std::string, std::string> read_instance_index(const fs::path& dir);
/// Writes instances.csv and returns the instance -> stem mapping.
std::map<std::string, std::string> write_instance_index(const fs::path& dir, const std::vector<std::string>& instances);

}  // namespace fedtox::cli
