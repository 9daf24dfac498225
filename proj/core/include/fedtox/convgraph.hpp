#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fedtox/corpus.hpp"

namespace fedtox {

using NodeId = std::size_t;

struct Edge {
  NodeId u = 0;  // u < v
  NodeId v = 0;
  std::int64_t weight = 0;

  bool operator==(const Edge&) const = default;
};

/// Undirected weighted graph whose nodes are conversations of one instance.
/// Edges are stored once per unordered pair, sorted by (u, v).
class ConversationGraph {
 public:
  ConversationGraph() = default;
  /// Throws ShapeError on self-loops, out-of-range endpoints, duplicate pairs or
  /// non-positive weights. Endpoint order inside each edge is normalized.
  ConversationGraph(std::string instance, std::vector<std::string> nodes, std::vector<Edge> edges);

  const std::string& instance() const noexcept { return instance_; }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  struct Neighbor {
    NodeId node;
    std::size_t edge;  // index into edges()
  };
  const std::vector<Neighbor>& neighbors(NodeId n) const { return adjacency_.at(n); }
  std::size_t degree(NodeId n) const { return adjacency_.at(n).size(); }

  /// Weighted degree: sum of incident edge weights.
  std::int64_t strength(NodeId n) const;
  /// 0 when the pair is not connected.
  std::int64_t weight(NodeId a, NodeId b) const;
  std::int64_t total_weight() const noexcept;

 private:
  std::string instance_;
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// One node per tree; an edge for every pair of conversations sharing at least
/// one participant, weighted by the number of shared participants. Pairs are
/// enumerated through the author -> conversations index.
ConversationGraph build_graph(const InstanceCorpus& corpus);

struct EdgeScore {
  NodeId u = 0;
  NodeId v = 0;
  double nc_score = 0.0;  // (-1, 1)
  double sdev = 0.0;
};

/// Noise-corrected edge significance with a Bayesian variance estimate.
/// Scores are aligned with graph.edges(). Throws DegenerateGraph when the total
/// directed weight is <= 1 or a prior variance is non-positive.
std::vector<EdgeScore> nc_scores(const ConversationGraph& graph);

/// Keeps edges with nc_score - delta * sdev > 0; all nodes are retained.
ConversationGraph extract_backbone(const ConversationGraph& graph, const std::vector<EdgeScore>& scores,
                                   double delta);

inline constexpr double kDefaultBackboneDelta = 1.64;

struct Retention {
  double node_retention = 1.0;
  double edge_retention = 1.0;
  double density_before = 0.0;
  double density_after = 0.0;
};

double density(const ConversationGraph& graph) noexcept;
Retention retention(const ConversationGraph& before, const ConversationGraph& after);

struct BackboneResult {
  ConversationGraph backbone;
  std::vector<EdgeScore> scores;  // aligned with the input graph's edges; empty if degenerate
  Retention retention;
  bool degenerate = false;
  std::size_t isolated_nodes = 0;  // nodes without edges after backboning
};

/// nc_scores + extract_backbone + retention; degenerate graphs pass through unchanged.
BackboneResult backbone_graph(const ConversationGraph& graph, double delta);

void write_nodes_csv(std::ostream& out, const ConversationGraph& graph);
void write_edges_csv(std::ostream& out, const ConversationGraph& graph);
void write_backbone_csv(std::ostream& out, const ConversationGraph& graph, const std::vector<EdgeScore>& scores,
                        const ConversationGraph& backbone);
/// Reads a node list and an edge list (u, v, weight[, ...]) keyed by conversation id.
ConversationGraph read_graph_csv(std::string instance, std::istream& nodes, std::istream& edges);

}  // namespace fedtox
