#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedtox/features.hpp"
#include "fedtox/graphsage.hpp"
#include "fedtox/labeling.hpp"
#include "fedtox/metrics.hpp"

namespace fedtox {

/// Everything one instance holds locally before the split: the (backboned)
/// graph, raw feature rows aligned with graph nodes, and node labels.
struct ClientData {
  std::string client_id;
  SageGraph graph;
  Eigen::MatrixXd features;
  std::vector<Label> labels;
};

struct SplitResult {
  std::vector<std::size_t> train_mask;  // sorted node indices
  std::vector<std::size_t> test_mask;   // sorted node indices
  bool stratified = false;
};

/// Stratified split when both classes have >= 2 nodes, plain random split
/// otherwise. With a cap, the train side is subsampled to exactly `train_cap`
/// nodes keeping class proportions (largest remainder). Throws ClientIneligible
/// when no nonempty test set is possible or the train side is smaller than the cap.
SplitResult split_client(std::span<const Label> labels, double train_ratio, std::optional<std::size_t> train_cap,
                         std::uint64_t seed);

/// A federated client after the split: features are already z-scored with the
/// client's own normalizer, fitted on its training rows only.
struct ClientState {
  std::string client_id;
  SageGraph graph;
  Eigen::MatrixXd features;
  std::vector<Label> labels;
  std::vector<std::size_t> train_mask;
  std::vector<std::size_t> test_mask;
  Normalizer normalizer;
  bool stratified = false;
};

struct FederationConfig {
  std::size_t rounds = 300;
  std::size_t clients_per_round = 50;
  std::optional<std::size_t> train_cap;
  TrainConfig train;
  std::size_t hidden = 64;
  std::size_t depth = 2;
  double train_ratio = 0.8;
  std::size_t eval_every = 0;  // 0 = evaluate after the final round only
  std::size_t threads = 1;     // clients trained concurrently within a round
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  std::string fingerprint() const;
};

/// Seed used for a client's split; shared by eligibility checks and client setup.
std::uint64_t split_seed(std::uint64_t seed, const std::string& client_id) noexcept;

/// Indices of clients that can supply the configured training cap (or >= 1
/// training node) plus a nonempty test set. Throws ConfigError when none are.
std::vector<std::size_t> eligible_clients(std::span<const ClientData> clients, const FederationConfig& config);

/// Splits and normalizes the eligible clients.
std::vector<ClientState> prepare_clients(std::span<const ClientData> clients, const FederationConfig& config);
ClientState make_client_state(const ClientData& data, const SplitResult& split);

/// Uniform sample without replacement, deterministic in (seed, round), returned
/// sorted. k larger than the population is clamped with a warning.
std::vector<std::size_t> sample_round_clients(std::size_t eligible_count, std::size_t k, std::size_t round_index,
                                              std::uint64_t seed);

/// Weighted parameter mean; weights must be positive. Only parameter blocks
/// and scalar weights cross the client boundary.
SageModel fedavg_aggregate(std::span<const SageModel> models, std::span<const double> weights);

struct ClientEvaluation {
  std::string client_id;
  std::size_t test_nodes = 0;
  ClassificationMetrics metrics;
};

struct EvaluationReport {
  std::size_t round = 0;
  ClassificationMetrics pooled;     // headline numbers
  double client_mean_macro_f1 = 0.0;
  std::vector<ClientEvaluation> per_client;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
  std::string config_hash;

  double macro_f1() const noexcept { return pooled.macro_f1; }
  double toxic_precision() const noexcept { return pooled.toxic_precision; }
  double toxic_recall() const noexcept { return pooled.toxic_recall; }
};

/// Pools test-node predictions over every client. Throws NoTestData.
EvaluationReport evaluate(const SageModel& model, std::span<const ClientState> clients);

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::string> participants;
  std::vector<std::string> skipped;  // diverged this round
  double mean_loss = 0.0;            // training-weighted, first local step
};

struct FederationResult {
  SageModel initial;
  SageModel global;
  std::vector<RoundRecord> rounds;
  std::vector<EvaluationReport> history;  // last entry = final evaluation
  std::size_t eligible_clients = 0;

  const EvaluationReport& final_report() const { return history.back(); }
};

/// FedAvg simulation: broadcast, local training on sampled clients, weighted
/// aggregation by training-node counts. Clients whose training diverges are
/// skipped for the round; a round where every client diverges is fatal.
FederationResult run_federation(std::span<const ClientState> clients, const FederationConfig& config);

}  // namespace fedtox
