#include "fedtox/grid.hpp"

#include <cmath>
#include <sstream>

#include "fedtox/error.hpp"
#include "fedtox/log.hpp"

namespace fedtox {

std::string_view to_string(GridAxis axis) noexcept {
  switch (axis) {
    case GridAxis::TrainSize:
      return "train-size";
    case GridAxis::ConvLength:
      return "conv-length";
    case GridAxis::ClientsPerRound:
      return "clients-per-round";
    case GridAxis::ToxicityThreshold:
      return "toxicity-threshold";
    case GridAxis::FeatureAblation:
      return "ablation";
  }
  return "train-size";
}

GridAxis parse_axis(std::string_view name) {
  for (GridAxis a : {GridAxis::TrainSize, GridAxis::ConvLength, GridAxis::ClientsPerRound,
                     GridAxis::ToxicityThreshold, GridAxis::FeatureAblation})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown grid axis '" + std::string(name) + "'");
}

std::vector<FeatureToggles> ablation_rows() {
  return {
      {true, false, false, false},
      {true, true, false, false},
      {true, true, true, false},
      {false, true, true, true},
      {true, true, true, true},
  };
}

FeatureToggles parse_toggles(std::string_view spec) {
  FeatureToggles t{false, false, false, false};
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t end = spec.find('+', start);
    if (end == std::string_view::npos) end = spec.size();
    const auto part = spec.substr(start, end - start);
    if (part == "DW")
      t.deepwalk = true;
    else if (part == "Auth")
      t.author = true;
    else if (part == "Sent")
      t.sentiment = true;
    else if (part == "Conv")
      t.conversation = true;
    else
      throw ConfigError("unknown feature group '" + std::string(part) + "'");
    start = end + 1;
  }
  return t;
}

namespace {

std::size_t parse_count(std::string_view v) {
  std::size_t pos = 0;
  const std::string s(v);
  try {
    const long long x = std::stoll(s, &pos);
    if (pos != s.size() || x < 1) throw ConfigError("expected a positive integer, got '" + s + "'");
    return static_cast<std::size_t>(x);
  } catch (const std::logic_error&) {
    throw ConfigError("expected a positive integer, got '" + s + "'");
  }
}

double parse_real(std::string_view v) {
  std::size_t pos = 0;
  const std::string s(v);
  try {
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("expected a number, got '" + s + "'");
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
}

}  // namespace

PipelineConfig apply_axis_value(const PipelineConfig& base, GridAxis axis, std::string_view value) {
  PipelineConfig c = base;
  switch (axis) {
    case GridAxis::TrainSize:
      c.federation.train_cap = parse_count(value);
      break;
    case GridAxis::ConvLength:
      c.min_posts = parse_count(value);
      break;
    case GridAxis::ClientsPerRound:
      c.federation.clients_per_round = parse_count(value);
      break;
    case GridAxis::ToxicityThreshold:
      c.policy.thr_root = parse_real(value);
      break;
    case GridAxis::FeatureAblation:
      c.features.toggles = parse_toggles(value);
      break;
  }
  c.validate();
  return c;
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

GridCell run_grid_cell(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config,
                       const std::string& value) {
  GridCell cell;
  cell.value = value;
  cell.seed = config.federation.seed;
  try {
    PipelineRun run = run_pipeline(corpora, config);
    const auto& rep = run.federation.final_report();
    cell.ok = true;
    cell.clients = run.federation.eligible_clients;
    cell.clients_per_round = std::min(config.federation.clients_per_round, cell.clients);
    cell.macro_f1 = rep.macro_f1();
    cell.toxic_precision = rep.toxic_precision();
    cell.toxic_recall = rep.toxic_recall();
    cell.config_hash = rep.config_hash;
  } catch (const Error& e) {
    cell.error = e.what();
    log_warning("grid cell " + value + " (seed " + std::to_string(cell.seed) + ") failed: " + e.what());
  }
  return cell;
}

GridReport run_experiment_grid(const std::vector<InstanceCorpus>& corpora, const GridSpec& spec,
                               const PipelineConfig& base) {
  if (spec.n_seeds < 1) throw ConfigError("grid needs >= 1 seed");
  std::vector<std::string> values = spec.values;
  if (values.empty()) {
    if (spec.axis != GridAxis::FeatureAblation) throw ConfigError("grid values must be nonempty");
    for (const auto& t : ablation_rows()) values.push_back(t.describe());
  }

  GridReport report;
  report.axis = spec.axis;
  for (const auto& value : values) {
    PipelineConfig cfg = apply_axis_value(base, spec.axis, value);
    GridRow row;
    row.value = value;
    std::vector<double> f1, prec, rec;
    for (std::size_t s = 0; s < spec.n_seeds; ++s) {
      cfg.federation.seed = base.federation.seed + s;
      GridCell cell = run_grid_cell(corpora, cfg, value);
      if (cell.ok) {
        if (row.seeds_ok == 0) {
          row.clients = cell.clients;
          row.clients_per_round = cell.clients_per_round;
        }
        ++row.seeds_ok;
        f1.push_back(cell.macro_f1);
        prec.push_back(cell.toxic_precision);
        rec.push_back(cell.toxic_recall);
      } else {
        ++row.seeds_failed;
      }
      report.cells.push_back(std::move(cell));
    }
    row.macro_f1 = mean_std(f1);
    row.toxic_precision = mean_std(prec);
    row.toxic_recall = mean_std(rec);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace fedtox
