#include "fedtox/pipeline.hpp"

#include <atomic>
#include <exception>
#include <optional>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "fedtox/error.hpp"
#include "fedtox/log.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

void PipelineConfig::validate() const {
  if (min_posts < 1) throw ConfigError("min_posts must be >= 1");
  if (!(backbone_delta >= 0.0)) throw ConfigError("backbone delta must be >= 0");
  policy.validate();
  if (features.toggles.deepwalk) features.walk.validate();
  if (features.toggles.dimension(features.walk.dims) == 0) throw ConfigError("every feature group is disabled");
  federation.validate();
}

std::string PipelineConfig::fingerprint() const {
  using detail::format_double;
  std::ostringstream os;
  os << "langs=";
  for (const auto& l : languages) os << l << ',';
  os << ";min_posts=" << min_posts << ";thr_root=" << format_double(policy.thr_root)
     << ";thr_number=" << policy.thr_number << ";thr_fraction=" << format_double(policy.thr_fraction)
     << ";backbone=" << backbone << ";delta=" << format_double(backbone_delta)
     << ";toggles=" << features.toggles.describe() << ";self_replies=" << features.count_self_replies;
  const WalkConfig& w = features.walk;
  os << ";walks=" << w.walks_per_node << ";walk_length=" << w.walk_length << ";window=" << w.window
     << ";negative=" << w.negative << ";epochs=" << w.epochs << ";dims=" << w.dims
     << ";walk_lr=" << format_double(w.learning_rate) << ";walk_min_lr=" << format_double(w.min_learning_rate);
  os << ";" << federation.fingerprint();
  return os.str();
}

namespace {

struct PreparedInstance {
  std::optional<ClientData> client;
  InstanceDiagnostics diagnostics;
};

PreparedInstance prepare_instance(const InstanceCorpus& raw, const PipelineConfig& config, std::uint64_t seed) {
  PreparedInstance out;
  InstanceCorpus corpus = filter_corpus(raw, config.languages, config.min_posts);
  if (corpus.empty()) {
    log_info("instance " + raw.instance() + " has no conversations after filtering");
    return out;
  }
  const auto labels = label_corpus(corpus, config.policy);
  const ConversationGraph graph = build_graph(corpus);
  BackboneResult bb;
  if (config.backbone) {
    bb = backbone_graph(graph, config.backbone_delta);
    if (bb.degenerate) log_warning("instance " + corpus.instance() + ": degenerate graph, backboning skipped");
  } else {
    bb.backbone = graph;
    bb.retention = retention(graph, graph);
    for (NodeId n = 0; n < graph.node_count(); ++n)
      if (graph.degree(n) == 0) ++bb.isolated_nodes;
  }

  FeatureMatrix features = extract_features(corpus, config.features, seed);

  InstanceDiagnostics& diag = out.diagnostics;
  diag.instance = corpus.instance();
  diag.conversations = corpus.trees().size();
  diag.edges_before = graph.edge_count();
  diag.edges_after = bb.backbone.edge_count();
  diag.isolated_nodes = bb.isolated_nodes;
  diag.degenerate_graph = bb.degenerate;
  diag.retention = bb.retention;

  ClientData client;
  client.client_id = corpus.instance();
  client.graph = SageGraph::from(bb.backbone);
  client.features = std::move(features.values);
  client.labels.reserve(labels.size());
  for (const auto& l : labels) {
    client.labels.push_back(l.label);
    if (l.label == Label::Toxic) ++diag.toxic;
  }
  out.client = std::move(client);
  return out;
}

}  // namespace

PreparedClients prepare_client_data(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config,
                                    std::uint64_t seed) {
  std::vector<PreparedInstance> slots(corpora.size());
  std::vector<std::exception_ptr> errors(corpora.size());
  auto work = [&](std::size_t i) {
    try {
      slots[i] = prepare_instance(corpora[i], config, seed);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(1, config.federation.threads), corpora.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < corpora.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < corpora.size(); i = next++) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  PreparedClients out;
  for (auto& slot : slots) {
    if (!slot.client) continue;
    out.clients.push_back(std::move(*slot.client));
    out.diagnostics.push_back(slot.diagnostics);
  }
  return out;
}

PipelineRun run_pipeline(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config) {
  config.validate();
  PipelineRun run;
  run.prepared = prepare_client_data(corpora, config, config.federation.seed);
  if (run.prepared.clients.empty()) throw ConfigError("no instance has conversations after filtering");
  run.clients = prepare_clients(run.prepared.clients, config.federation);
  run.federation = run_federation(run.clients, config.federation);
  const std::string hash = hex_digest(config.fingerprint());
  for (auto& report : run.federation.history) report.config_hash = hash;
  return run;
}

}  // namespace fedtox
