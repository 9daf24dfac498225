#include "fedtox/report.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "csv_util.hpp"

namespace fedtox {

namespace {

using nlohmann::ordered_json;
using detail::csv_field;
using detail::format_double;

ordered_json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

ordered_json metrics_json(const ClassificationMetrics& m) {
  ordered_json j;
  j["macro_f1"] = m.macro_f1;
  j["toxic_precision"] = m.toxic_precision;
  j["toxic_recall"] = m.toxic_recall;
  j["toxic_f1"] = m.toxic_f1;
  j["nontoxic_f1"] = m.nontoxic_f1;
  j["confusion"] = confusion_json(m.confusion);
  j["toxic_precision_undefined"] = m.toxic_precision_undefined;
  j["toxic_recall_undefined"] = m.toxic_recall_undefined;
  j["toxic_class_absent"] = m.toxic_class_absent;
  j["nontoxic_class_absent"] = m.nontoxic_class_absent;
  return j;
}

ordered_json evaluation_object(const EvaluationReport& r) {
  ordered_json j;
  j["round"] = r.round;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["pooled"] = metrics_json(r.pooled);
  j["client_mean_macro_f1"] = r.client_mean_macro_f1;
  ordered_json clients = ordered_json::array();
  for (const auto& c : r.per_client) {
    ordered_json e;
    e["client_id"] = c.client_id;
    e["test_nodes"] = c.test_nodes;
    e["metrics"] = metrics_json(c.metrics);
    clients.push_back(std::move(e));
  }
  j["per_client"] = std::move(clients);
  j["warnings"] = r.warnings;
  return j;
}

ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

std::string pm(const MeanStd& m) { return fixed4(m.mean) + " ± " + fixed4(m.std); }

}  // namespace

std::string evaluation_json(const EvaluationReport& report) { return evaluation_object(report).dump(2) + "\n"; }

std::string federation_json(const FederationResult& result, const FederationConfig& config) {
  ordered_json j;
  j["eligible_clients"] = result.eligible_clients;
  j["rounds"] = result.rounds.size();
  const SageShape& shape = result.global.shape();
  j["model"] = {{"input_dim", shape.input_dim}, {"hidden", shape.hidden}, {"depth", shape.depth}};
  const TrainConfig& t = config.train;
  j["training"] = {{"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                   {"learning_rate", t.learning_rate},
                   {"local_epochs", t.local_epochs},
                   {"clients_per_round", config.clients_per_round},
                   {"train_cap", config.train_cap ? *config.train_cap : 0},
                   {"train_ratio", config.train_ratio},
                   {"seed", config.seed}};
  j["final"] = evaluation_object(result.final_report());
  ordered_json history = ordered_json::array();
  for (const auto& r : result.history)
    history.push_back({{"round", r.round},
                       {"macro_f1", r.macro_f1()},
                       {"toxic_precision", r.toxic_precision()},
                       {"toxic_recall", r.toxic_recall()}});
  j["history"] = std::move(history);
  return j.dump(2) + "\n";
}

void write_client_metrics_csv(std::ostream& out, const EvaluationReport& report) {
  out << "client_id,test_nodes,macro_f1,toxic_precision,toxic_recall,tp,fp,fn,tn\n";
  for (const auto& c : report.per_client) {
    const auto& m = c.metrics;
    out << csv_field(c.client_id) << ',' << c.test_nodes << ',' << format_double(m.macro_f1) << ','
        << format_double(m.toxic_precision) << ',' << format_double(m.toxic_recall) << ',' << m.confusion.tp << ','
        << m.confusion.fp << ',' << m.confusion.fn << ',' << m.confusion.tn << '\n';
  }
}

void write_rounds_csv(std::ostream& out, const FederationResult& result) {
  out << "round,participants,skipped,mean_loss\n";
  for (const auto& r : result.rounds)
    out << r.round << ',' << r.participants.size() << ',' << r.skipped.size() << ',' << format_double(r.mean_loss)
        << '\n';
}

void write_diagnostics_csv(std::ostream& out, const std::vector<InstanceDiagnostics>& diagnostics) {
  out << "instance,conversations,toxic,edges_before,edges_after,isolated_nodes,degenerate,node_retention,"
         "edge_retention,density_before,density_after\n";
  for (const auto& d : diagnostics)
    out << csv_field(d.instance) << ',' << d.conversations << ',' << d.toxic << ',' << d.edges_before << ','
        << d.edges_after << ',' << d.isolated_nodes << ',' << (d.degenerate_graph ? 1 : 0) << ','
        << format_double(d.retention.node_retention) << ',' << format_double(d.retention.edge_retention) << ','
        << format_double(d.retention.density_before) << ',' << format_double(d.retention.density_after) << '\n';
}

std::string evaluation_markdown(const EvaluationReport& report) {
  std::ostringstream os;
  os << "| Metric | Value |\n|---|---|\n";
  os << "| Macro F1 | " << fixed4(report.macro_f1()) << " |\n";
  os << "| Toxic precision | " << fixed4(report.toxic_precision()) << " |\n";
  os << "| Toxic recall | " << fixed4(report.toxic_recall()) << " |\n";
  os << "| Client-mean macro F1 | " << fixed4(report.client_mean_macro_f1) << " |\n";
  os << "| Clients evaluated | " << report.per_client.size() << " |\n";
  os << "| Seed | " << report.seed << " |\n";
  os << "| Config hash | `" << report.config_hash << "` |\n";
  return os.str();
}

void write_grid_csv(std::ostream& out, const GridReport& report) {
  out << "axis,value,clients,clients_per_round,macro_f1_mean,macro_f1_std,toxic_precision_mean,"
         "toxic_precision_std,toxic_recall_mean,toxic_recall_std,seeds_ok,seeds_failed\n";
  for (const auto& r : report.rows)
    out << to_string(report.axis) << ',' << csv_field(r.value) << ',' << r.clients << ',' << r.clients_per_round << ','
        << format_double(r.macro_f1.mean) << ',' << format_double(r.macro_f1.std) << ','
        << format_double(r.toxic_precision.mean) << ',' << format_double(r.toxic_precision.std) << ','
        << format_double(r.toxic_recall.mean) << ',' << format_double(r.toxic_recall.std) << ',' << r.seeds_ok
        << ',' << r.seeds_failed << '\n';
}

void write_grid_cells_csv(std::ostream& out, const GridReport& report) {
  out << "value,seed,ok,clients,clients_per_round,macro_f1,toxic_precision,toxic_recall,config_hash,error\n";
  for (const auto& c : report.cells)
    out << csv_field(c.value) << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ',' << c.clients << ','
        << c.clients_per_round << ',' << format_double(c.macro_f1) << ',' << format_double(c.toxic_precision) << ','
        << format_double(c.toxic_recall) << ',' << c.config_hash << ',' << csv_field(c.error) << '\n';
}

std::string grid_json(const GridReport& report) {
  ordered_json j;
  j["axis"] = std::string(to_string(report.axis));
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json e;
    e["value"] = r.value;
    e["clients"] = r.clients;
    e["clients_per_round"] = r.clients_per_round;
    e["macro_f1"] = mean_std_json(r.macro_f1);
    e["toxic_precision"] = mean_std_json(r.toxic_precision);
    e["toxic_recall"] = mean_std_json(r.toxic_recall);
    e["seeds_ok"] = r.seeds_ok;
    e["seeds_failed"] = r.seeds_failed;
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  ordered_json cells = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json e;
    e["value"] = c.value;
    e["seed"] = c.seed;
    e["ok"] = c.ok;
    e["clients"] = c.clients;
    e["clients_per_round"] = c.clients_per_round;
    e["macro_f1"] = c.macro_f1;
    e["toxic_precision"] = c.toxic_precision;
    e["toxic_recall"] = c.toxic_recall;
    e["config_hash"] = c.config_hash;
    e["error"] = c.error;
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string grid_markdown(const GridReport& report) {
  std::ostringstream os;
  os << "| " << to_string(report.axis) << " | #Clients | Clients/round | Macro F1 | Precision | Recall |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    os << "| " << r.value << " | " << r.clients << " | " << r.clients_per_round << " | ";
    if (r.seeds_ok == 0) {
      os << "failed | failed | failed |\n";
      continue;
    }
    os << pm(r.macro_f1) << " | " << pm(r.toxic_precision) << " | " << pm(r.toxic_recall) << " |\n";
  }
  return os.str();
}

void write_llm_csv(std::ostream& out, const LlmEvalReport& report) {
  out << "setup,seed,instances,classified,macro_f1,toxic_precision,toxic_recall,refusals,recovered,"
         "endpoint_failures\n";
  for (const auto& r : report.runs)
    out << to_string(r.setup) << ',' << r.seed << ',' << r.instances << ',' << r.classified << ','
        << format_double(r.macro_f1) << ',' << format_double(r.toxic_precision) << ','
        << format_double(r.toxic_recall) << ',' << r.refusals << ',' << r.recovered << ',' << r.endpoint_failures
        << '\n';
}

std::string llm_json(const LlmEvalReport& report) {
  ordered_json j;
  ordered_json runs = ordered_json::array();
  for (const auto& r : report.runs) {
    ordered_json e;
    e["setup"] = std::string(to_string(r.setup));
    e["seed"] = r.seed;
    e["instances"] = r.instances;
    e["classified"] = r.classified;
    e["macro_f1"] = r.macro_f1;
    e["toxic_precision"] = r.toxic_precision;
    e["toxic_recall"] = r.toxic_recall;
    e["refusals"] = r.refusals;
    e["recovered"] = r.recovered;
    e["endpoint_failures"] = r.endpoint_failures;
    ordered_json per = ordered_json::array();
    for (const auto& p : r.per_instance) per.push_back({{"instance", p.instance}, {"metrics", metrics_json(p.metrics)}});
    e["per_instance"] = std::move(per);
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);
  ordered_json summary = ordered_json::array();
  for (const auto& s : report.summary) {
    ordered_json e;
    e["setup"] = std::string(to_string(s.setup));
    e["macro_f1"] = mean_std_json(s.macro_f1);
    e["toxic_precision"] = mean_std_json(s.toxic_precision);
    e["toxic_recall"] = mean_std_json(s.toxic_recall);
    e["classified"] = s.classified;
    e["refusals"] = s.refusals;
    e["endpoint_failures"] = s.endpoint_failures;
    summary.push_back(std::move(e));
  }
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

std::string llm_markdown(const LlmEvalReport& report) {
  std::ostringstream os;
  os << "| LLM setup | Macro F1 | Precision | Recall | Classified | Refusals | Endpoint failures |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& s : report.summary)
    os << "| " << to_string(s.setup) << " | " << pm(s.macro_f1) << " | " << pm(s.toxic_precision) << " | "
       << pm(s.toxic_recall) << " | " << s.classified << " | " << s.refusals << " | " << s.endpoint_failures << " |\n";
  return os.str();
}

}  // namespace fedtox
