#include "fedtox/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "csv_util.hpp"
#include "fedtox/error.hpp"

namespace fedtox {

std::size_t FeatureToggles::dimension(std::size_t embedding_dims) const noexcept {
  std::size_t d = 0;
  if (deepwalk) d += 3 * embedding_dims;
  if (author) d += layout::kUserDims;
  if (sentiment) d += layout::kSentimentDims;
  if (conversation) d += layout::kConversationDims;
  return d;
}

std::string FeatureToggles::describe() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(deepwalk, "DW");
  add(author, "Auth");
  add(sentiment, "Sent");
  add(conversation, "Conv");
  return s.empty() ? "none" : s;
}

std::vector<double> pool_embeddings(const ConversationTree& tree, const EmbeddingTable& embeddings) {
  const std::size_t d = embeddings.dims();
  std::vector<double> out(3 * d, 0.0);
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(2 * d), out.end(),
            -std::numeric_limits<double>::infinity());
  for (const auto& t : tree.toots()) {
    auto v = embeddings.at(t.toot_id);
    for (std::size_t k = 0; k < d; ++k) {
      out[d + k] += v[k];
      out[2 * d + k] = std::max(out[2 * d + k], v[k]);
    }
  }
  const double n = static_cast<double>(tree.size());
  for (std::size_t k = 0; k < d; ++k) out[k] = out[d + k] / n;
  return out;
}

UserActivityIndex::UserActivityIndex(const InstanceCorpus& corpus, bool count_self_replies) {
  for (const auto& tree : corpus.trees()) {
    for (const auto& t : tree.toots()) {
      auto& a = activity_[t.author_id];
      a.statuses_authored += 1.0;
      if (t.is_root()) continue;
      a.replies_made += 1.0;
      const Toot& parent = tree.toots()[*tree.position_of(*t.parent_id)];
      if (count_self_replies || parent.author_id != t.author_id) activity_[parent.author_id].replies_received += 1.0;
    }
  }
}

UserActivityIndex::Lookup UserActivityIndex::lookup(const std::string& user_id) const {
  auto it = activity_.find(user_id);
  if (it == activity_.end()) return {};
  return {it->second, true};
}

UserActivityIndex::Lookup user_features(const InstanceCorpus& corpus, const std::string& user_id,
                                        bool count_self_replies) {
  return UserActivityIndex(corpus, count_self_replies).lookup(user_id);
}

std::array<double, layout::kUserDims> conversation_user_block(const ConversationTree& tree,
                                                              const UserActivityIndex& users) {
  std::array<double, layout::kUserDims> out{};
  for (std::size_t k = 0; k < 3; ++k) out[6 + k] = -std::numeric_limits<double>::infinity();
  for (const auto& user : tree.participants()) {
    const auto a = users.lookup(user).activity;
    const double triple[3] = {a.replies_made, a.replies_received, a.statuses_authored};
    for (std::size_t k = 0; k < 3; ++k) {
      out[3 + k] += triple[k];
      out[6 + k] = std::max(out[6 + k], triple[k]);
    }
  }
  const double n = static_cast<double>(tree.participants().size());
  for (std::size_t k = 0; k < 3; ++k) out[k] = out[3 + k] / n;
  return out;
}

std::array<double, layout::kSentimentDims> sentiment_features(const ConversationTree& tree) {
  const auto& toots = tree.toots();
  const double n = static_cast<double>(toots.size());
  double sum = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  double drift = 0.0;
  for (std::size_t i = 0; i < toots.size(); ++i) {
    const double s = toots[i].sentiment;
    sum += s;
    mn = std::min(mn, s);
    if (i + 1 < toots.size()) drift += std::max(0.0, s - toots[i + 1].sentiment);
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& t : toots) ss += (t.sentiment - mean) * (t.sentiment - mean);
  return {mean, toots.back().sentiment, mn, drift, std::sqrt(ss / n)};
}

std::array<double, layout::kConversationDims> conversation_statistics(const ConversationTree& tree) {
  const auto& toots = tree.toots();
  std::vector<double> gaps;
  for (std::size_t i = 1; i < toots.size(); ++i)
    gaps.push_back(static_cast<double>(toots[i].created_at - toots[i - 1].created_at));
  double median = 0.0;
  if (!gaps.empty()) {
    std::sort(gaps.begin(), gaps.end());
    const std::size_t m = gaps.size() / 2;
    median = gaps.size() % 2 ? gaps[m] : 0.5 * (gaps[m - 1] + gaps[m]);
  }
  return {static_cast<double>(toots.size()), static_cast<double>(tree.participants().size()), median};
}

FeatureVector assemble(const ConversationTree& tree, const UserActivityIndex& users,
                       const EmbeddingTable* embeddings, const FeatureToggles& toggles) {
  FeatureVector fv;
  fv.conversation_id = tree.conversation_id();
  if (toggles.deepwalk) {
    if (!embeddings) throw MissingEmbedding("DeepWalk block enabled without an embedding table");
    auto pooled = pool_embeddings(tree, *embeddings);
    fv.values.insert(fv.values.end(), pooled.begin(), pooled.end());
  }
  if (toggles.author) {
    auto block = conversation_user_block(tree, users);
    fv.values.insert(fv.values.end(), block.begin(), block.end());
  }
  if (toggles.sentiment) {
    auto block = sentiment_features(tree);
    fv.values.insert(fv.values.end(), block.begin(), block.end());
  }
  if (toggles.conversation) {
    auto block = conversation_statistics(tree);
    fv.values.insert(fv.values.end(), block.begin(), block.end());
  }
  return fv;
}

FeatureMatrix extract_features(const InstanceCorpus& corpus, const FeatureConfig& config, std::uint64_t seed) {
  const std::size_t dims = config.toggles.dimension(config.walk.dims);
  if (dims == 0) throw ConfigError("every feature group is disabled");
  EmbeddingTable embeddings;
  if (config.toggles.deepwalk) embeddings = deepwalk_embed(corpus, config.walk, seed);
  const UserActivityIndex users(corpus, config.count_self_replies);

  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(corpus.trees().size()), static_cast<Eigen::Index>(dims));
  Eigen::Index row = 0;
  for (const auto& tree : corpus.trees()) {
    auto fv = assemble(tree, users, config.toggles.deepwalk ? &embeddings : nullptr, config.toggles);
    for (std::size_t k = 0; k < dims; ++k) out.values(row, static_cast<Eigen::Index>(k)) = fv.values[k];
    out.ids.push_back(std::move(fv.conversation_id));
    ++row;
  }
  return out;
}

namespace {

Normalizer finish_normalizer(Eigen::VectorXd mean, Eigen::VectorXd var) {
  Normalizer n;
  n.mean = std::move(mean);
  n.stddev = var.cwiseMax(0.0).cwiseSqrt();
  n.constant.assign(static_cast<std::size_t>(n.stddev.size()), false);
  for (Eigen::Index k = 0; k < n.stddev.size(); ++k) {
    if (n.stddev(k) < Normalizer::kStdFloor) {
      n.stddev(k) = Normalizer::kStdFloor;
      n.constant[static_cast<std::size_t>(k)] = true;
    }
  }
  return n;
}

}  // namespace

Normalizer fit_normalizer(const Eigen::MatrixXd& train) {
  if (train.rows() == 0) throw NoTrainingData("cannot fit a normalizer on zero rows");
  Eigen::VectorXd mean = train.colwise().mean().transpose();
  Eigen::MatrixXd centered = train.rowwise() - mean.transpose();
  Eigen::VectorXd var = centered.array().square().colwise().sum().transpose() / static_cast<double>(train.rows());
  return finish_normalizer(std::move(mean), std::move(var));
}

Normalizer fit_normalizer(const Eigen::MatrixXd& all_rows, std::span<const std::size_t> train_rows) {
  Eigen::MatrixXd train(static_cast<Eigen::Index>(train_rows.size()), all_rows.cols());
  for (std::size_t i = 0; i < train_rows.size(); ++i)
    train.row(static_cast<Eigen::Index>(i)) = all_rows.row(static_cast<Eigen::Index>(train_rows[i]));
  return fit_normalizer(train);
}

Eigen::VectorXd apply_normalizer(const Normalizer& normalizer, const Eigen::VectorXd& vector) {
  if (vector.size() != normalizer.mean.size()) throw ShapeError("normalizer dimension mismatch");
  Eigen::VectorXd out = (vector - normalizer.mean).cwiseQuotient(normalizer.stddev);
  for (std::size_t k = 0; k < normalizer.constant.size(); ++k)
    if (normalizer.constant[k]) out(static_cast<Eigen::Index>(k)) = 0.0;
  return out;
}

Eigen::MatrixXd apply_normalizer(const Normalizer& normalizer, const Eigen::MatrixXd& rows) {
  if (rows.cols() != normalizer.mean.size()) throw ShapeError("normalizer dimension mismatch");
  Eigen::MatrixXd out = (rows.rowwise() - normalizer.mean.transpose()).array().rowwise() /
                        normalizer.stddev.transpose().array();
  for (std::size_t k = 0; k < normalizer.constant.size(); ++k)
    if (normalizer.constant[k]) out.col(static_cast<Eigen::Index>(k)).setZero();
  return out;
}

void write_features_csv(std::ostream& out, const FeatureMatrix& features) {
  out << "conversation_id";
  for (Eigen::Index k = 0; k < features.values.cols(); ++k) out << ",f" << k;
  out << '\n';
  for (Eigen::Index r = 0; r < features.values.rows(); ++r) {
    out << detail::csv_field(features.ids[static_cast<std::size_t>(r)]);
    for (Eigen::Index k = 0; k < features.values.cols(); ++k) out << ',' << detail::format_double(features.values(r, k));
    out << '\n';
  }
}

FeatureMatrix read_features_csv(std::istream& in) {
  FeatureMatrix fm;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t cols = 0;
  bool header = true;
  while (std::getline(in, line)) {
    auto f = detail::split_csv(line);
    if (header) {
      header = false;
      cols = f.size() - 1;
      continue;
    }
    if (line.empty()) continue;
    if (f.size() != cols + 1) throw ParseError("feature row has " + std::to_string(f.size()) + " columns");
    fm.ids.push_back(f[0]);
    std::vector<double> r(cols);
    for (std::size_t k = 0; k < cols; ++k) r[k] = std::stod(f[k + 1]);
    rows.push_back(std::move(r));
  }
  fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < cols; ++k)
      fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  return fm;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated binary feature file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_features_binary(std::ostream& out, const Eigen::MatrixXd& values) {
  put_u64(out, static_cast<std::uint64_t>(values.rows()));
  put_u64(out, static_cast<std::uint64_t>(values.cols()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(values(r, c)));
}

Eigen::MatrixXd read_features_binary(std::istream& in) {
  const auto rows = get_u64(in);
  const auto cols = get_u64(in);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_u64(in));
  return m;
}

}  // namespace fedtox
