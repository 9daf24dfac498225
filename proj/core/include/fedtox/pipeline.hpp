#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fedtox/convgraph.hpp"
#include "fedtox/corpus.hpp"
#include "fedtox/federation.hpp"
#include "fedtox/features.hpp"
#include "fedtox/labeling.hpp"

namespace fedtox {

/// Parameters of the corpus -> labels -> backbone -> features -> FedAvg chain.
struct PipelineConfig {
  std::set<std::string> languages = default_languages();
  std::size_t min_posts = 5;
  ModerationPolicy policy;
  bool backbone = true;  // false trains on the full conversation graph
  double backbone_delta = kDefaultBackboneDelta;
  FeatureConfig features;
  FederationConfig federation;

  void validate() const;  // throws ConfigError
  /// Every parameter that influences a run, federation seed included.
  std::string fingerprint() const;
};

struct InstanceDiagnostics {
  std::string instance;
  std::size_t conversations = 0;
  std::size_t toxic = 0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
  std::size_t isolated_nodes = 0;
  bool degenerate_graph = false;
  Retention retention;
};

struct PreparedClients {
  std::vector<ClientData> clients;  // one per nonempty instance after filtering
  std::vector<InstanceDiagnostics> diagnostics;
};

/// Filters, labels, builds and backbones each instance graph and extracts the
/// node features. `seed` drives the embedding walks. Instances are processed on
/// up to config.federation.threads threads; results do not depend on the count.
PreparedClients prepare_client_data(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config,
                                    std::uint64_t seed);

struct PipelineRun {
  PreparedClients prepared;
  std::vector<ClientState> clients;  // eligible, split and normalized
  FederationResult federation;
};

/// prepare_client_data + prepare_clients + run_federation, all driven by
/// config.federation.seed. Reports carry the hash of config.fingerprint().
PipelineRun run_pipeline(const std::vector<InstanceCorpus>& corpora, const PipelineConfig& config);

}  // namespace fedtox
