#include "fedtox/labeling.hpp"

#include <istream>
#include <ostream>

#include "csv_util.hpp"
#include "fedtox/error.hpp"

namespace fedtox {

std::string_view to_string(Label label) noexcept {
  return label == Label::Toxic ? "toxic" : "non-toxic";
}

std::string_view to_string(LabelReason reason) noexcept {
  switch (reason) {
    case LabelReason::RootToxic:
      return "root-toxic";
    case LabelReason::ReplyMass:
      return "reply-mass";
    case LabelReason::Clean:
      return "clean";
  }
  return "clean";
}

Label parse_label(std::string_view s) {
  if (s == "toxic" || s == "Toxic" || s == "1") return Label::Toxic;
  if (s == "non-toxic" || s == "NonToxic" || s == "0") return Label::NonToxic;
  throw ParseError("unknown label '" + std::string(s) + "'");
}

namespace {
LabelReason parse_reason(std::string_view s) {
  if (s == "root-toxic") return LabelReason::RootToxic;
  if (s == "reply-mass") return LabelReason::ReplyMass;
  if (s == "clean") return LabelReason::Clean;
  throw ParseError("unknown label reason '" + std::string(s) + "'");
}
}  // namespace

void ModerationPolicy::validate() const {
  if (!(thr_root >= 0.0 && thr_root <= 1.0)) throw ConfigError("thr_root must be in [0,1]");
  if (!(thr_fraction >= 0.0 && thr_fraction <= 1.0)) throw ConfigError("thr_fraction must be in [0,1]");
}

bool toot_is_toxic(double score, const ModerationPolicy& policy) noexcept {
  return score > policy.thr_root;
}

ConversationLabel label_conversation(const ConversationTree& tree, const ModerationPolicy& policy) {
  ConversationLabel out{tree.conversation_id(), Label::NonToxic, LabelReason::Clean};
  if (toot_is_toxic(tree.root().toxicity, policy)) {
    out.label = Label::Toxic;
    out.reason = LabelReason::RootToxic;
    return out;
  }
  const std::size_t replies = tree.reply_count();
  if (replies == 0) return out;

  std::size_t toxic = 0;
  for (const auto& t : tree.toots())
    if (!t.is_root() && toot_is_toxic(t.toxicity, policy)) ++toxic;
  const double fraction = static_cast<double>(toxic) / static_cast<double>(replies);
  if (toxic > policy.thr_number && fraction > policy.thr_fraction) {
    out.label = Label::Toxic;
    out.reason = LabelReason::ReplyMass;
  }
  return out;
}

std::vector<ConversationLabel> label_corpus(const InstanceCorpus& corpus, const ModerationPolicy& policy) {
  std::vector<ConversationLabel> labels;
  labels.reserve(corpus.trees().size());
  for (const auto& tree : corpus.trees()) labels.push_back(label_conversation(tree, policy));
  return labels;
}

void write_labels_csv(std::ostream& out, const std::vector<ConversationLabel>& labels) {
  out << "conversation_id,label,reason\n";
  for (const auto& l : labels)
    out << detail::csv_field(l.conversation_id) << ',' << to_string(l.label) << ',' << to_string(l.reason)
        << '\n';
}

std::vector<ConversationLabel> read_labels_csv(std::istream& in) {
  std::vector<ConversationLabel> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() < 2) throw ParseError("labels line " + std::to_string(lineno) + " has too few columns");
    ConversationLabel l;
    l.conversation_id = f[0];
    l.label = parse_label(f[1]);
    l.reason = f.size() > 2 ? parse_reason(f[2])
                            : (l.label == Label::Toxic ? LabelReason::RootToxic : LabelReason::Clean);
    labels.push_back(std::move(l));
  }
  return labels;
}

}  // namespace fedtox
