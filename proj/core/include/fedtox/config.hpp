#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedtox/grid.hpp"
#include "fedtox/llm_baseline.hpp"
#include "fedtox/pipeline.hpp"
#include "fedtox/synth.hpp"

namespace fedtox {

/// Value of the flat TOML subset: scalars and one-level arrays of scalars.
using TomlScalar = std::variant<bool, std::int64_t, double, std::string>;
struct TomlValue {
  std::variant<bool, std::int64_t, double, std::string, std::vector<TomlScalar>> value;
  std::size_t line = 0;
};

/// Keys are "table.key"; keys before any table header have no prefix.
using TomlDocument = std::map<std::string, TomlValue>;

/// Tables, key = value pairs, comments, basic and literal strings, integers,
/// floats, booleans and (possibly multi-line) arrays of scalars. Throws
/// ConfigError with the offending line.
TomlDocument parse_toml(std::string_view text);

struct RunConfig {
  std::string workdir = "fedtox-run";
  std::string input;  // corpus for `ingest`; empty = the synth stage output
  PipelineConfig pipeline;
  SynthConfig synth;
  GridSpec grid;
  EndpointConfig endpoint;
  LlmEvalConfig llm;
  std::size_t text_budget = kDefaultTextBudget;

  void validate() const;  // throws ConfigError
};

/// Unknown tables or keys and mistyped values are ConfigErrors.
RunConfig run_config_from(const TomlDocument& doc);
RunConfig parse_run_config(std::string_view text);

/// Applies "table.key=value"; the value is read as a TOML value, falling back
/// to a bare string. Throws ConfigError.
void apply_override(RunConfig& config, std::string_view assignment);

/// Every field, in the format parse_run_config reads.
std::string to_toml(const RunConfig& config);

/// Explicit path first, then $FEDTOX_CONFIG, then ./fedtox.toml if present.
std::optional<std::string> resolve_config_path(const std::optional<std::string>& explicit_path);
/// Defaults when no path resolves. Throws ConfigError for unreadable files.
RunConfig load_run_config(const std::optional<std::string>& explicit_path);

enum class Stage { Synth, Ingest, Label, Graph, Backbone, Features, Train, Grid, LlmEval, Report };
std::string_view to_string(Stage stage) noexcept;

/// Parameters a stage's output depends on, upstream stages included.
std::string stage_fingerprint(const RunConfig& config, Stage stage);
std::string stage_hash(const RunConfig& config, Stage stage);

}  // namespace fedtox
