#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fedtox/corpus.hpp"

namespace fedtox {

/// Class indices are fixed everywhere: 0 = Toxic, 1 = NonToxic.
enum class Label : int { Toxic = 0, NonToxic = 1 };
enum class LabelReason { RootToxic, ReplyMass, Clean };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(LabelReason reason) noexcept;
Label parse_label(std::string_view s);  // throws ParseError

/// A moderator's tolerance. The same threshold decides toot-level toxicity for
/// the root and for replies.
struct ModerationPolicy {
  double thr_root = 0.6;
  std::size_t thr_number = 1;
  double thr_fraction = 0.01;

  void validate() const;  // throws ConfigError

  /// thr_number large enough that the reply clause can never fire.
  static constexpr std::size_t unbounded_number = std::numeric_limits<std::size_t>::max();
};

struct ConversationLabel {
  std::string conversation_id;
  Label label = Label::NonToxic;
  LabelReason reason = LabelReason::Clean;

  bool operator==(const ConversationLabel&) const = default;
};

bool toot_is_toxic(double score, const ModerationPolicy& policy) noexcept;

/// Toxic if the root is toxic, or if the reply count and reply fraction of toxic
/// replies both exceed their thresholds (all comparisons strict; root excluded
/// from the reply counts).
ConversationLabel label_conversation(const ConversationTree& tree, const ModerationPolicy& policy);

std::vector<ConversationLabel> label_corpus(const InstanceCorpus& corpus, const ModerationPolicy& policy);

void write_labels_csv(std::ostream& out, const std::vector<ConversationLabel>& labels);
std::vector<ConversationLabel> read_labels_csv(std::istream& in);

}  // namespace fedtox
