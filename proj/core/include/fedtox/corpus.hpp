#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fedtox {

/// One post or reply. Scores are ingested, never computed here.
struct Toot {
  std::string toot_id;
  std::string conversation_id;
  std::optional<std::string> parent_id;  // absent for the root
  std::string author_id;
  std::string instance;
  std::int64_t created_at = 0;  // Unix seconds
  std::string lang;
  double toxicity = 0.0;   // [0, 1]
  double sentiment = 0.0;  // [-1, 1]
  std::optional<std::string> text;

  bool is_root() const noexcept { return !parent_id.has_value(); }
};

/// A validated reply tree. Toots are ordered by (created_at, toot_id).
class ConversationTree {
 public:
  const std::string& conversation_id() const noexcept { return conversation_id_; }
  const std::string& instance() const noexcept { return instance_; }
  const Toot& root() const noexcept { return toots_[root_pos_]; }
  const std::vector<Toot>& toots() const noexcept { return toots_; }
  std::size_t size() const noexcept { return toots_.size(); }
  std::size_t reply_count() const noexcept { return toots_.size() - 1; }

  /// child toot_id -> parent toot_id, for every non-root toot.
  const std::map<std::string, std::string>& parent_index() const noexcept { return parent_index_; }
  const std::set<std::string>& participants() const noexcept { return participants_; }

  /// Position of toot_id inside toots(), if present.
  std::optional<std::size_t> position_of(const std::string& toot_id) const;

  friend ConversationTree build_tree(std::vector<Toot> records);

 private:
  ConversationTree() = default;

  std::string conversation_id_;
  std::string instance_;
  std::size_t root_pos_ = 0;
  std::vector<Toot> toots_;
  std::map<std::string, std::string> parent_index_;
  std::map<std::string, std::size_t> position_;
  std::set<std::string> participants_;
};

/// Validates parent links and builds the tree.
/// Throws ConversationMalformed (zero or several roots, cycles, mixed
/// conversation ids) or OrphanReply (parent missing from the records).
ConversationTree build_tree(std::vector<Toot> records);

/// All conversations of one instance plus the author -> conversations index.
class InstanceCorpus {
 public:
  InstanceCorpus() = default;
  /// Throws ConversationMalformed on duplicate conversation ids.
  InstanceCorpus(std::string instance, std::vector<ConversationTree> trees);

  const std::string& instance() const noexcept { return instance_; }
  const std::vector<ConversationTree>& trees() const noexcept { return trees_; }
  const std::map<std::string, std::set<std::string>>& user_index() const noexcept {
    return user_index_;
  }
  bool empty() const noexcept { return trees_.empty(); }
  std::size_t toot_count() const noexcept;

 private:
  std::string instance_;
  std::vector<ConversationTree> trees_;
  std::map<std::string, std::set<std::string>> user_index_;
};

struct Rejection {
  std::size_t line = 0;  // 1-based input line
  std::string reason;
};

struct ParseResult {
  std::vector<InstanceCorpus> corpora;  // sorted by instance id
  std::vector<Rejection> rejections;
  std::size_t lines_read = 0;
  std::size_t records_accepted = 0;
  std::size_t conversations_rejected = 0;
};

/// Parses line-delimited JSON toot records. Bad lines and invalid
/// conversations are reported in `rejections`; conversations are assigned to
/// the instance of their root toot. Throws ParseError if the stream is unreadable.
ParseResult parse_corpus(std::istream& in);

/// Same grouping and tree validation as parse_corpus for records already in memory;
/// rejection line numbers are 1-based record positions.
ParseResult group_records(std::vector<Toot> records);

/// Keeps trees whose root language is allowed and which have at least
/// `min_posts` toots. An empty allowed set admits every language.
InstanceCorpus filter_corpus(const InstanceCorpus& corpus, const std::set<std::string>& allowed_langs,
                             std::size_t min_posts);

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t conversations = 0;
  std::size_t toots = 0;
  std::size_t unique_authors = 0;

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const std::vector<InstanceCorpus>& corpora);

void write_toot_jsonl(std::ostream& out, const Toot& toot);
void write_corpus_jsonl(std::ostream& out, const std::vector<InstanceCorpus>& corpora);
void write_rejections_csv(std::ostream& out, const std::vector<Rejection>& rejections);

/// Default language set for the supported scoring models.
std::set<std::string> default_languages();

}  // namespace fedtox
