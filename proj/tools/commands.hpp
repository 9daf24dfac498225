#pragma once

#include <string>

#include "fedtox/config.hpp"

namespace fedtox::cli {

void run_synth(const RunConfig& config);
void run_ingest(const RunConfig& config);
void run_label(const RunConfig& config);
void run_graph(const RunConfig& config);
void run_backbone(const RunConfig& config);
void run_features(const RunConfig& config);
void run_train(const RunConfig& config);
void run_grid(const RunConfig& config);
/// `endpoint` "mock:oracle" and "mock:nontoxic" answer from the stage labels
/// without a server.
void run_llm_eval(const RunConfig& config);
void run_report(const RunConfig& config);

}  // namespace fedtox::cli
