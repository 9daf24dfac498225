#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedtox/corpus.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t epochs = 5;
  std::size_t dims = 128;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;

  void validate() const;  // throws ConfigError
};

/// All reply trees of an instance as one undirected forest over toots.
struct TootForest {
  std::vector<std::string> toot_ids;
  std::vector<std::vector<std::size_t>> adjacency;

  static TootForest from_corpus(const InstanceCorpus& corpus);
  static TootForest from_tree(const ConversationTree& tree);
};

using Walk = std::vector<std::size_t>;

/// Truncated uniform random walks, `walks_per_node` starting at every node
/// (node order reshuffled per pass). A node without neighbours repeats itself.
std::vector<Walk> generate_walks(const TootForest& forest, const WalkConfig& config, Rng& rng);

/// Visits every (center, context) pair within `window` positions, walk by walk.
void for_each_skipgram_pair(const std::vector<Walk>& walks, std::size_t window,
                            const std::function<void(std::size_t, std::size_t)>& visit);

std::map<std::pair<std::size_t, std::size_t>, std::size_t> skipgram_cooccurrence(const std::vector<Walk>& walks,
                                                                               std::size_t window);

/// Row-major embedding table keyed by toot id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dims, std::vector<std::string> ids, std::vector<double> values);

  std::size_t dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(const std::string& toot_id) const { return index_.count(toot_id) > 0; }
  /// Throws MissingEmbedding.
  std::span<const double> at(const std::string& toot_id) const;
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dims_, dims_}; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Test helper: set a toot's vector directly.
  void set(const std::string& toot_id, std::span<const double> v);

 private:
  std::size_t dims_ = 0;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
};

/// Skip-gram with negative sampling over the walk corpus; returns the input
/// (center) vectors, one row per forest node. Single-threaded and deterministic;
/// the arithmetic runs in single precision.
std::vector<double> train_skipgram(const std::vector<Walk>& walks, std::size_t vocab_size,
                                   const WalkConfig& config, Rng& rng);

/// DeepWalk over the instance's forest of conversation trees.
EmbeddingTable deepwalk_embed(const InstanceCorpus& corpus, const WalkConfig& config, std::uint64_t seed);

}  // namespace fedtox
