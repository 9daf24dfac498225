#pragma once

#include <iosfwd>
#include <string>

#include "fedtox/federation.hpp"
#include "fedtox/grid.hpp"
#include "fedtox/llm_baseline.hpp"
#include "fedtox/pipeline.hpp"

namespace fedtox {

// Serializers are deterministic: equal inputs give byte-identical output.

std::string evaluation_json(const EvaluationReport& report);
/// Final evaluation, evaluation history and the model and training settings.
std::string federation_json(const FederationResult& result, const FederationConfig& config);
/// client_id, test_nodes, macro_f1, toxic_precision, toxic_recall, tp, fp, fn, tn
void write_client_metrics_csv(std::ostream& out, const EvaluationReport& report);
/// round, participants, skipped, mean_loss
void write_rounds_csv(std::ostream& out, const FederationResult& result);
void write_diagnostics_csv(std::ostream& out, const std::vector<InstanceDiagnostics>& diagnostics);
std::string evaluation_markdown(const EvaluationReport& report);

/// One row per axis value: value, clients, clients/round and mean/std of the metrics.
void write_grid_csv(std::ostream& out, const GridReport& report);
void write_grid_cells_csv(std::ostream& out, const GridReport& report);
std::string grid_json(const GridReport& report);
std::string grid_markdown(const GridReport& report);

void write_llm_csv(std::ostream& out, const LlmEvalReport& report);
std::string llm_json(const LlmEvalReport& report);
std::string llm_markdown(const LlmEvalReport& report);

}  // namespace fedtox
