#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedtox/pipeline.hpp"

namespace fedtox {

/// One-parameter-at-a-time experiment families.
enum class GridAxis { TrainSize, ConvLength, ClientsPerRound, ToxicityThreshold, FeatureAblation };

std::string_view to_string(GridAxis axis) noexcept;
GridAxis parse_axis(std::string_view name);  // throws ConfigError

/// The five feature-group combinations of the ablation family.
std::vector<FeatureToggles> ablation_rows();
FeatureToggles parse_toggles(std::string_view spec);  // "DW+Auth+Sent+Conv"; throws ConfigError

/// Returns `base` with one axis value applied. Throws ConfigError for values
/// that do not parse for the axis.
PipelineConfig apply_axis_value(const PipelineConfig& base, GridAxis axis, std::string_view value);

struct GridSpec {
  GridAxis axis = GridAxis::TrainSize;
  std::vector<std::string> values;  // empty for FeatureAblation = the five default rows
  std::size_t n_seeds = 3;          // seeds are base seed, base seed + 1, ...
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& xs);

struct GridCell {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t clients = 0;
  std::size_t clients_per_round = 0;
  double macro_f1 = 0.0;
  double toxic_precision = 0.0;
  double toxic_recall = 0.0;
  std::string config_hash;
};

struct GridRow {
  std::string value;
  std::size_t clients = 0;
  std::size_t clients_per_round = 0;
  MeanStd macro_f1;
  MeanStd toxic_precision;
  MeanStd toxic_recall;
  std::size_t seeds_ok = 0;
  std::size_t seeds_failed = 0;
};

struct GridReport {
  GridAxis axis = GridAxis::TrainSize;
  std::vector<GridRow> rows;
  std::vector<GridCell> cells;
};

/// Re-runs the full pipeline for every (value, seed). A failed cell is recorded
/// and the grid continues.
GridReport run_experiment_grid(const std::vector<InstanceCorpus>& corpora, const GridSpec& spec,
                               const PipelineConfig& base);

GridCell run_grid_cell(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config,
                       const std::string& value);

}  // namespace fedtox
