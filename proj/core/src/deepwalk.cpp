#include "fedtox/deepwalk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedtox/error.hpp"

namespace fedtox {

void WalkConfig::validate() const {
  if (walks_per_node < 1 || walk_length < 1) throw ConfigError("deepwalk needs >= 1 walk of length >= 1");
  if (window < 1) throw ConfigError("deepwalk window must be >= 1");
  if (dims < 1) throw ConfigError("deepwalk dims must be >= 1");
  if (epochs < 1) throw ConfigError("deepwalk epochs must be >= 1");
  if (!(learning_rate > 0.0) || min_learning_rate < 0.0) throw ConfigError("deepwalk learning rate invalid");
}

TootForest TootForest::from_corpus(const InstanceCorpus& corpus) {
  TootForest f;
  for (const auto& tree : corpus.trees()) {
    const std::size_t base = f.toot_ids.size();
    for (const auto& t : tree.toots()) f.toot_ids.push_back(t.toot_id);
    f.adjacency.resize(f.toot_ids.size());
    for (const auto& [child, parent] : tree.parent_index()) {
      const std::size_t c = base + *tree.position_of(child);
      const std::size_t p = base + *tree.position_of(parent);
      f.adjacency[c].push_back(p);
      f.adjacency[p].push_back(c);
    }
  }
  for (auto& adj : f.adjacency) std::sort(adj.begin(), adj.end());
  return f;
}

TootForest TootForest::from_tree(const ConversationTree& tree) {
  return from_corpus(InstanceCorpus(tree.instance(), {tree}));
}

std::vector<Walk> generate_walks(const TootForest& forest, const WalkConfig& config, Rng& rng) {
  const std::size_t n = forest.toot_ids.size();
  std::vector<Walk> walks;
  walks.reserve(n * config.walks_per_node);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t pass = 0; pass < config.walks_per_node; ++pass) {
    rng.shuffle(order);
    for (std::size_t start : order) {
      Walk w;
      w.reserve(config.walk_length);
      w.push_back(start);
      while (w.size() < config.walk_length) {
        const auto& nbrs = forest.adjacency[w.back()];
        w.push_back(nbrs.empty() ? w.back() : nbrs[rng.index(nbrs.size())]);
      }
      walks.push_back(std::move(w));
    }
  }
  return walks;
}

void for_each_skipgram_pair(const std::vector<Walk>& walks, std::size_t window,
                            const std::function<void(std::size_t, std::size_t)>& visit) {
  for (const auto& w : walks) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::size_t lo = i >= window ? i - window : 0;
      const std::size_t hi = std::min(w.size() - 1, i + window);
      for (std::size_t j = lo; j <= hi; ++j)
        if (j != i) visit(w[i], w[j]);
    }
  }
}

std::map<std::pair<std::size_t, std::size_t>, std::size_t> skipgram_cooccurrence(const std::vector<Walk>& walks,
                                                                               std::size_t window) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for_each_skipgram_pair(walks, window, [&](std::size_t c, std::size_t o) { ++counts[{c, o}]; });
  return counts;
}

EmbeddingTable::EmbeddingTable(std::size_t dims, std::vector<std::string> ids, std::vector<double> values)
    : dims_(dims), ids_(std::move(ids)), values_(std::move(values)) {
  if (values_.size() != ids_.size() * dims_) throw ShapeError("embedding table size mismatch");
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::span<const double> EmbeddingTable::at(const std::string& toot_id) const {
  auto it = index_.find(toot_id);
  if (it == index_.end()) throw MissingEmbedding("no embedding for toot " + toot_id);
  return row(it->second);
}

void EmbeddingTable::set(const std::string& toot_id, std::span<const double> v) {
  if (v.size() != dims_) throw ShapeError("embedding dimension mismatch");
  auto it = index_.find(toot_id);
  if (it == index_.end()) {
    it = index_.emplace(toot_id, ids_.size()).first;
    ids_.push_back(toot_id);
    values_.resize(ids_.size() * dims_);
  }
  std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dims_));
}

namespace {

float sigmoid(float x) {
  if (x > 30.0f) return 1.0f;
  if (x < -30.0f) return 0.0f;
  return 1.0f / (1.0f + std::exp(-x));
}

// Vose alias table: O(1) draws from a fixed discrete distribution.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights) : prob_(weights.size()), alias_(weights.size()) {
    const std::size_t n = weights.size();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
    for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::size_t draw(Rng& rng) const {
    const std::size_t i = rng.index(prob_.size());
    return rng.uniform() < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

// Four independent accumulators let the compiler vectorize the reduction.
float dot(const float* a, const float* b, std::size_t n) {
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  std::size_t d = 0;
  for (; d + 4 <= n; d += 4) {
    s0 += a[d] * b[d];
    s1 += a[d + 1] * b[d + 1];
    s2 += a[d + 2] * b[d + 2];
    s3 += a[d + 3] * b[d + 3];
  }
  for (; d < n; ++d) s0 += a[d] * b[d];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

std::vector<double> train_skipgram(const std::vector<Walk>& walks, std::size_t vocab_size,
                                   const WalkConfig& config, Rng& rng) {
  const std::size_t dims = config.dims;
  std::vector<float> input(vocab_size * dims);
  std::vector<float> output(vocab_size * dims, 0.0f);
  for (auto& x : input) x = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(dims));

  // Noise distribution: unigram counts raised to 3/4.
  std::vector<double> noise(vocab_size, 0.0);
  for (const auto& w : walks)
    for (std::size_t t : w) noise[t] += 1.0;
  for (auto& c : noise) c = std::pow(c, 0.75);
  const AliasTable sampler(noise);

  std::size_t pairs_per_epoch = 0;
  for (const auto& w : walks)
    for (std::size_t i = 0; i < w.size(); ++i)
      pairs_per_epoch += std::min(w.size() - 1, i + config.window) - (i >= config.window ? i - config.window : 0);
  const double total_pairs = static_cast<double>(std::max<std::size_t>(1, pairs_per_epoch * config.epochs));

  std::vector<float> grad(dims);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& w : walks) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(w.size() - 1, i + config.window);
        float* in = input.data() + w[i] * dims;
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::size_t context = w[j];
          const auto lr = static_cast<float>(std::max(
              config.min_learning_rate, config.learning_rate * (1.0 - static_cast<double>(processed) / total_pairs)));
          ++processed;
          std::fill(grad.begin(), grad.end(), 0.0f);
          for (std::size_t k = 0; k <= config.negative; ++k) {
            std::size_t target = context;
            float label = 1.0f;
            if (k > 0) {
              target = sampler.draw(rng);
              if (target == context) continue;
              label = 0.0f;
            }
            float* out = output.data() + target * dims;
            const float g = (label - sigmoid(dot(in, out, dims))) * lr;
            for (std::size_t d = 0; d < dims; ++d) {
              grad[d] += g * out[d];
              out[d] += g * in[d];
            }
          }
          for (std::size_t d = 0; d < dims; ++d) in[d] += grad[d];
        }
      }
    }
  }
  return std::vector<double>(input.begin(), input.end());
}

EmbeddingTable deepwalk_embed(const InstanceCorpus& corpus, const WalkConfig& config, std::uint64_t seed) {
  config.validate();
  if (corpus.empty()) return EmbeddingTable(config.dims, {}, {});
  TootForest forest = TootForest::from_corpus(corpus);
  Rng rng(derive_seed({seed, hash_string(corpus.instance()), 0xd33f}));
  auto walks = generate_walks(forest, config, rng);
  auto values = train_skipgram(walks, forest.toot_ids.size(), config, rng);
  return EmbeddingTable(config.dims, std::move(forest.toot_ids), std::move(values));
}

}  // namespace fedtox
