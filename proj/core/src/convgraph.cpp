#include "fedtox/convgraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "csv_util.hpp"
#include "fedtox/error.hpp"

namespace fedtox {

ConversationGraph::ConversationGraph(std::string instance, std::vector<std::string> nodes, std::vector<Edge> edges)
    : instance_(std::move(instance)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t n = nodes_.size();
  for (auto& e : edges_) {
    if (e.u >= n || e.v >= n) throw ShapeError("edge endpoint out of range");
    if (e.u == e.v) throw ShapeError("self-loop on node " + nodes_[e.u]);
    if (e.weight < 1) throw ShapeError("edge weight must be >= 1");
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
  for (std::size_t i = 1; i < edges_.size(); ++i)
    if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
      throw ShapeError("duplicate edge " + nodes_[edges_[i].u] + " - " + nodes_[edges_[i].v]);

  adjacency_.resize(n);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    adjacency_[edges_[i].u].push_back({edges_[i].v, i});
    adjacency_[edges_[i].v].push_back({edges_[i].u, i});
  }
}

std::int64_t ConversationGraph::strength(NodeId n) const {
  std::int64_t s = 0;
  for (const auto& nb : adjacency_.at(n)) s += edges_[nb.edge].weight;
  return s;
}

std::int64_t ConversationGraph::weight(NodeId a, NodeId b) const {
  for (const auto& nb : adjacency_.at(a))
    if (nb.node == b) return edges_[nb.edge].weight;
  return 0;
}

std::int64_t ConversationGraph::total_weight() const noexcept {
  std::int64_t s = 0;
  for (const auto& e : edges_) s += e.weight;
  return s;
}

ConversationGraph build_graph(const InstanceCorpus& corpus) {
  std::vector<std::string> nodes;
  std::unordered_map<std::string, NodeId> index;
  for (const auto& tree : corpus.trees()) {
    index.emplace(tree.conversation_id(), nodes.size());
    nodes.push_back(tree.conversation_id());
  }

  const std::uint64_t n = nodes.size();
  std::unordered_map<std::uint64_t, std::int64_t> weights;
  std::vector<NodeId> convs;
  for (const auto& [user, conversation_ids] : corpus.user_index()) {
    convs.clear();
    for (const auto& c : conversation_ids) convs.push_back(index.at(c));
    std::sort(convs.begin(), convs.end());
    for (std::size_t i = 0; i < convs.size(); ++i)
      for (std::size_t j = i + 1; j < convs.size(); ++j) ++weights[convs[i] * n + convs[j]];
  }

  std::vector<Edge> edges;
  edges.reserve(weights.size());
  for (const auto& [key, w] : weights) edges.push_back({key / n, key % n, w});
  return ConversationGraph(corpus.instance(), std::move(nodes), std::move(edges));
}

std::vector<EdgeScore> nc_scores(const ConversationGraph& graph) {
  const double total = 2.0 * static_cast<double>(graph.total_weight());
  if (graph.edge_count() == 0 || total <= 1.0)
    throw DegenerateGraph("graph " + graph.instance() + " has total weight " + detail::format_double(total));

  std::vector<double> strength(graph.node_count());
  for (NodeId i = 0; i < graph.node_count(); ++i) strength[i] = static_cast<double>(graph.strength(i));

  std::vector<EdgeScore> scores;
  scores.reserve(graph.edge_count());
  for (const auto& e : graph.edges()) {
    const double nij = static_cast<double>(e.weight);
    const double ni = strength[e.u];
    const double nj = strength[e.v];

    const double kappa = total / (ni * nj);
    const double score = (kappa * nij - 1.0) / (kappa * nij + 1.0);

    const double prior_mean = (ni * nj) / (total * total);
    const double prior_var =
        (ni * nj * (total - ni) * (total - nj)) / (std::pow(total, 4) * (total - 1.0));
    if (!(prior_var > 0.0))
      throw DegenerateGraph("non-positive prior variance on edge " + graph.nodes()[e.u] + " - " +
                            graph.nodes()[e.v]);
    const double alpha_prior = (prior_mean * prior_mean / prior_var) * (1.0 - prior_mean) - prior_mean;
    const double beta_prior = (prior_mean / prior_var) * (1.0 - prior_mean * prior_mean) - (1.0 - prior_mean);
    const double alpha_post = alpha_prior + nij;
    const double beta_post = beta_prior + total - nij;
    const double expected_p = alpha_post / (alpha_post + beta_post);
    const double var_nij = expected_p * (1.0 - expected_p) * total;

    const double d = 1.0 / (ni * nj) - total * ((ni + nj) / ((ni * nj) * (ni * nj)));
    const double slope = 2.0 * (kappa + nij * d) / ((kappa * nij + 1.0) * (kappa * nij + 1.0));
    const double var_score = var_nij * slope * slope;

    scores.push_back({e.u, e.v, score, std::sqrt(var_score)});
  }
  return scores;
}

ConversationGraph extract_backbone(const ConversationGraph& graph, const std::vector<EdgeScore>& scores,
                                   double delta) {
  if (scores.size() != graph.edge_count()) throw ShapeError("scores do not cover every edge");
  if (!(delta >= 0.0)) throw ConfigError("backbone delta must be >= 0");
  std::vector<Edge> kept;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& e = graph.edges()[i];
    if (scores[i].u != e.u || scores[i].v != e.v) throw ShapeError("scores are not aligned with edges");
    if (scores[i].nc_score - delta * scores[i].sdev > 0.0) kept.push_back(e);
  }
  return ConversationGraph(graph.instance(), graph.nodes(), std::move(kept));
}

double density(const ConversationGraph& graph) noexcept {
  const double v = static_cast<double>(graph.node_count());
  if (v < 2.0) return 0.0;
  return 2.0 * static_cast<double>(graph.edge_count()) / (v * (v - 1.0));
}

namespace {
std::size_t connected_nodes(const ConversationGraph& g) {
  std::size_t n = 0;
  for (NodeId i = 0; i < g.node_count(); ++i)
    if (g.degree(i) > 0) ++n;
  return n;
}
}  // namespace

Retention retention(const ConversationGraph& before, const ConversationGraph& after) {
  Retention r;
  r.density_before = density(before);
  r.density_after = density(after);
  const std::size_t connected_before = connected_nodes(before);
  // Both fractions share the node count, so the ratio reduces to connected counts.
  r.node_retention = connected_before == 0
                         ? 1.0
                         : static_cast<double>(connected_nodes(after)) / static_cast<double>(connected_before);
  r.edge_retention = before.edge_count() == 0 ? 1.0
                                              : static_cast<double>(after.edge_count()) /
                                                    static_cast<double>(before.edge_count());
  return r;
}

BackboneResult backbone_graph(const ConversationGraph& graph, double delta) {
  BackboneResult out;
  try {
    out.scores = nc_scores(graph);
    out.backbone = extract_backbone(graph, out.scores, delta);
  } catch (const DegenerateGraph&) {
    out.degenerate = true;
    out.scores.clear();
    out.backbone = graph;
  }
  out.retention = retention(graph, out.backbone);
  for (NodeId i = 0; i < out.backbone.node_count(); ++i)
    if (out.backbone.degree(i) == 0) ++out.isolated_nodes;
  return out;
}

void write_nodes_csv(std::ostream& out, const ConversationGraph& graph) {
  out << "conversation_id\n";
  for (const auto& n : graph.nodes()) out << detail::csv_field(n) << '\n';
}

void write_edges_csv(std::ostream& out, const ConversationGraph& graph) {
  out << "u,v,weight\n";
  for (const auto& e : graph.edges())
    out << detail::csv_field(graph.nodes()[e.u]) << ',' << detail::csv_field(graph.nodes()[e.v]) << ','
        << e.weight << '\n';
}

void write_backbone_csv(std::ostream& out, const ConversationGraph& graph, const std::vector<EdgeScore>& scores,
                        const ConversationGraph& backbone) {
  out << "u,v,weight,nc_score,sdev,kept\n";
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    const auto& e = graph.edges()[i];
    const bool kept = backbone.weight(e.u, e.v) > 0;
    out << detail::csv_field(graph.nodes()[e.u]) << ',' << detail::csv_field(graph.nodes()[e.v]) << ','
        << e.weight << ',';
    if (scores.empty())
      out << ",,";
    else
      out << detail::format_double(scores[i].nc_score) << ',' << detail::format_double(scores[i].sdev) << ',';
    out << (kept ? 1 : 0) << '\n';
  }
}

ConversationGraph read_graph_csv(std::string instance, std::istream& nodes_in, std::istream& edges_in) {
  std::vector<std::string> nodes;
  std::unordered_map<std::string, NodeId> index;
  std::string line;
  bool header = true;
  while (std::getline(nodes_in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    index.emplace(f[0], nodes.size());
    nodes.push_back(f[0]);
  }

  std::vector<Edge> edges;
  std::ptrdiff_t kept_col = -1;
  header = true;
  std::size_t lineno = 0;
  while (std::getline(edges_in, line)) {
    ++lineno;
    auto f = detail::split_csv(line);
    if (header) {
      header = false;
      auto it = std::find(f.begin(), f.end(), "kept");
      if (it != f.end()) kept_col = it - f.begin();
      continue;
    }
    if (line.empty()) continue;
    if (f.size() < 3) throw ParseError("edge line " + std::to_string(lineno) + " has too few columns");
    if (kept_col >= 0 && (static_cast<std::size_t>(kept_col) >= f.size() || f[kept_col] != "1")) continue;
    auto u = index.find(f[0]);
    auto v = index.find(f[1]);
    if (u == index.end() || v == index.end())
      throw ParseError("edge line " + std::to_string(lineno) + " references an unknown node");
    edges.push_back({u->second, v->second, std::stoll(f[2])});
  }
  return ConversationGraph(std::move(instance), std::move(nodes), std::move(edges));
}

}  // namespace fedtox
