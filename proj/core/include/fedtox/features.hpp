#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedtox/corpus.hpp"
#include "fedtox/deepwalk.hpp"

namespace fedtox {

// Full-vector layout. Blocks that are toggled off are dropped and the
// remaining blocks keep this relative order.
namespace layout {
inline constexpr std::size_t kEmbeddingDims = 128;
inline constexpr std::size_t kPooledDims = 3 * kEmbeddingDims;  // mean | sum | max
inline constexpr std::size_t kUserDims = 9;                      // mean | sum | max of 3 user features
inline constexpr std::size_t kSentimentDims = 5;                 // mean, last, min, drift, volatility
inline constexpr std::size_t kConversationDims = 3;              // length, unique users, median gap
inline constexpr std::size_t kFullDims = kPooledDims + kUserDims + kSentimentDims + kConversationDims;
static_assert(kFullDims == 401);

inline constexpr std::size_t kPooledOffset = 0;
inline constexpr std::size_t kUserOffset = kPooledOffset + kPooledDims;
inline constexpr std::size_t kSentimentOffset = kUserOffset + kUserDims;
inline constexpr std::size_t kConversationOffset = kSentimentOffset + kSentimentDims;
}  // namespace layout

/// Feature-group switches used by the ablation grid.
struct FeatureToggles {
  bool deepwalk = true;      // DW
  bool author = true;        // Auth
  bool sentiment = true;     // Sent
  bool conversation = true;  // Conv

  std::size_t dimension(std::size_t embedding_dims = layout::kEmbeddingDims) const noexcept;
  std::string describe() const;  // e.g. "DW+Auth+Sent+Conv"
  bool operator==(const FeatureToggles&) const = default;
};

struct FeatureVector {
  std::string conversation_id;
  std::vector<double> values;
};

/// Element-wise mean, sum and max over the tree's toot embeddings, concatenated.
/// Throws MissingEmbedding.
std::vector<double> pool_embeddings(const ConversationTree& tree, const EmbeddingTable& embeddings);

struct UserActivity {
  double replies_made = 0.0;
  double replies_received = 0.0;
  double statuses_authored = 0.0;
};

/// Instance-wide per-author activity counts.
class UserActivityIndex {
 public:
  /// With count_self_replies = false, replying to one's own toot counts as a
  /// reply made but not as a reply received.
  explicit UserActivityIndex(const InstanceCorpus& corpus, bool count_self_replies = false);

  /// Zeros with known = false for authors absent from the instance.
  struct Lookup {
    UserActivity activity;
    bool known = false;
  };
  Lookup lookup(const std::string& user_id) const;

 private:
  std::map<std::string, UserActivity> activity_;
};

UserActivityIndex::Lookup user_features(const InstanceCorpus& corpus, const std::string& user_id,
                                        bool count_self_replies = false);

/// Mean, sum and max of the participants' (replies made, replies received,
/// statuses authored) triples.
std::array<double, layout::kUserDims> conversation_user_block(const ConversationTree& tree,
                                                              const UserActivityIndex& users);

/// (mean, last, min, negative drift, population std) over toots in temporal order.
std::array<double, layout::kSentimentDims> sentiment_features(const ConversationTree& tree);

/// (toot count, unique participants, median gap between consecutive toots in seconds).
std::array<double, layout::kConversationDims> conversation_statistics(const ConversationTree& tree);

/// Concatenates the enabled blocks. `embeddings` may be null when DW is off.
FeatureVector assemble(const ConversationTree& tree, const UserActivityIndex& users,
                       const EmbeddingTable* embeddings, const FeatureToggles& toggles = {});

/// One row per conversation, in tree order (aligned with build_graph nodes).
struct FeatureMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // rows = ids.size()
};

struct FeatureConfig {
  WalkConfig walk;
  FeatureToggles toggles;
  bool count_self_replies = false;
};

FeatureMatrix extract_features(const InstanceCorpus& corpus, const FeatureConfig& config, std::uint64_t seed);

/// Per-dimension z-scoring with statistics from training rows only.
struct Normalizer {
  static constexpr double kStdFloor = 1e-8;

  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // >= kStdFloor everywhere
  std::vector<bool> constant;  // dimensions whose training std fell below the floor

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Throws NoTrainingData when `train` has no rows.
Normalizer fit_normalizer(const Eigen::MatrixXd& train);
Normalizer fit_normalizer(const Eigen::MatrixXd& all_rows, std::span<const std::size_t> train_rows);
/// Constant dimensions map to 0. Throws ShapeError on dimension mismatch.
Eigen::VectorXd apply_normalizer(const Normalizer& normalizer, const Eigen::VectorXd& vector);
Eigen::MatrixXd apply_normalizer(const Normalizer& normalizer, const Eigen::MatrixXd& rows);

void write_features_csv(std::ostream& out, const FeatureMatrix& features);
FeatureMatrix read_features_csv(std::istream& in);
/// Little-endian: u64 rows, u64 cols, then rows*cols f64 values row-major.
void write_features_binary(std::ostream& out, const Eigen::MatrixXd& values);
Eigen::MatrixXd read_features_binary(std::istream& in);

}  // namespace fedtox
