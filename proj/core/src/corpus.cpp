#include "fedtox/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "csv_util.hpp"
#include "fedtox/error.hpp"

namespace fedtox {

using nlohmann::json;

std::optional<std::size_t> ConversationTree::position_of(const std::string& toot_id) const {
  auto it = position_.find(toot_id);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

ConversationTree build_tree(std::vector<Toot> records) {
  if (records.empty()) throw ConversationMalformed("empty conversation");
  const std::string conv = records.front().conversation_id;

  std::sort(records.begin(), records.end(), [](const Toot& a, const Toot& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.toot_id < b.toot_id;
  });

  ConversationTree tree;
  tree.conversation_id_ = conv;
  std::size_t roots = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Toot& t = records[i];
    if (t.conversation_id != conv)
      throw ConversationMalformed("toot " + t.toot_id + " belongs to " + t.conversation_id + ", not " + conv);
    if (!tree.position_.emplace(t.toot_id, i).second)
      throw ConversationMalformed("duplicate toot id " + t.toot_id + " in " + conv);
    if (t.is_root()) {
      ++roots;
      tree.root_pos_ = i;
    }
  }
  if (roots != 1)
    throw ConversationMalformed(conv + " has " + std::to_string(roots) + " root toots");

  std::unordered_map<std::string, std::vector<std::size_t>> children;
  for (const Toot& t : records) {
    if (t.is_root()) continue;
    if (!tree.position_.count(*t.parent_id))
      throw OrphanReply("toot " + t.toot_id + " replies to missing " + *t.parent_id + " in " + conv);
    children[*t.parent_id].push_back(tree.position_.at(t.toot_id));
    tree.parent_index_.emplace(t.toot_id, *t.parent_id);
  }

  // With one root and every parent present, any cycle leaves toots unreachable from the root.
  std::vector<char> seen(records.size(), 0);
  std::vector<std::size_t> stack{tree.root_pos_};
  seen[tree.root_pos_] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    std::size_t cur = stack.back();
    stack.pop_back();
    auto it = children.find(records[cur].toot_id);
    if (it == children.end()) continue;
    for (std::size_t c : it->second) {
      if (!seen[c]) {
        seen[c] = 1;
        ++reached;
        stack.push_back(c);
      }
    }
  }
  if (reached != records.size()) throw ConversationMalformed(conv + " contains a reply cycle");

  for (const Toot& t : records) tree.participants_.insert(t.author_id);
  tree.instance_ = records[tree.root_pos_].instance;
  tree.toots_ = std::move(records);
  return tree;
}

InstanceCorpus::InstanceCorpus(std::string instance, std::vector<ConversationTree> trees)
    : instance_(std::move(instance)), trees_(std::move(trees)) {
  std::unordered_set<std::string> ids;
  for (const auto& tree : trees_) {
    if (!ids.insert(tree.conversation_id()).second)
      throw ConversationMalformed("duplicate conversation id " + tree.conversation_id() + " in " + instance_);
    for (const auto& user : tree.participants()) user_index_[user].insert(tree.conversation_id());
  }
}

std::size_t InstanceCorpus::toot_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : trees_) n += t.size();
  return n;
}

namespace {

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ParseError(std::string("missing field ") + key);
  if (!it->is_string()) throw ParseError(std::string("field ") + key + " is not a string");
  std::string v = it->get<std::string>();
  if (v.empty()) throw ParseError(std::string("field ") + key + " is empty");
  return v;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(std::string("field ") + key + " is not a string");
  return it->get<std::string>();
}

double required_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ParseError(std::string("missing field ") + key);
  if (!it->is_number()) throw ParseError(std::string("field ") + key + " is not a number");
  return it->get<double>();
}

Toot parse_toot(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");

  Toot t;
  t.toot_id = required_string(j, "toot_id");
  t.conversation_id = required_string(j, "conversation_id");
  t.parent_id = optional_string(j, "parent_id");
  if (t.parent_id && t.parent_id->empty()) t.parent_id.reset();
  t.author_id = required_string(j, "author_id");
  t.instance = required_string(j, "instance");
  t.lang = required_string(j, "lang");
  t.text = optional_string(j, "text");

  auto ts = j.find("created_at");
  if (ts == j.end() || ts->is_null()) throw ParseError("missing field created_at");
  if (!ts->is_number_integer()) throw ParseError("field created_at is not an integer");
  t.created_at = ts->get<std::int64_t>();
  if (t.created_at < 0) throw ParseError("created_at is negative");

  t.toxicity = required_number(j, "toxicity");
  if (!(t.toxicity >= 0.0 && t.toxicity <= 1.0)) throw ParseError("toxicity out of [0,1]");
  t.sentiment = required_number(j, "sentiment");
  if (!(t.sentiment >= -1.0 && t.sentiment <= 1.0)) throw ParseError("sentiment out of [-1,1]");
  return t;
}

}  // namespace

namespace {

struct NumberedToot {
  std::size_t line;
  Toot toot;
};

void group_into(ParseResult& result, std::vector<NumberedToot> records) {
  struct Pending {
    std::vector<Toot> records;
    std::size_t first_line = 0;
  };
  std::map<std::string, Pending> by_conversation;
  for (auto& r : records) {
    auto& pending = by_conversation[r.toot.conversation_id];
    if (pending.records.empty()) pending.first_line = r.line;
    pending.records.push_back(std::move(r.toot));
  }

  std::map<std::string, std::vector<ConversationTree>> by_instance;
  for (auto& [conv, pending] : by_conversation) {
    try {
      ConversationTree tree = build_tree(std::move(pending.records));
      by_instance[tree.instance()].push_back(std::move(tree));
    } catch (const Error& e) {
      result.rejections.push_back({pending.first_line, "conversation " + conv + ": " + e.what()});
      ++result.conversations_rejected;
    }
  }
  std::stable_sort(result.rejections.begin(), result.rejections.end(),
                   [](const Rejection& a, const Rejection& b) { return a.line < b.line; });
  for (auto& [instance, trees] : by_instance) result.corpora.emplace_back(instance, std::move(trees));
}

}  // namespace

ParseResult parse_corpus(std::istream& in) {
  if (!in) throw ParseError("input stream is not readable");

  ParseResult result;
  std::vector<NumberedToot> records;
  std::unordered_set<std::string> toot_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Toot t = parse_toot(line);
      if (!toot_ids.insert(t.toot_id).second) throw ParseError("duplicate toot_id " + t.toot_id);
      records.push_back({lineno, std::move(t)});
      ++result.records_accepted;
    } catch (const ParseError& e) {
      result.rejections.push_back({lineno, e.what()});
    }
  }
  if (in.bad()) throw ParseError("read failure after line " + std::to_string(lineno));
  result.lines_read = lineno;
  group_into(result, std::move(records));
  return result;
}

ParseResult group_records(std::vector<Toot> toots) {
  ParseResult result;
  result.lines_read = toots.size();
  std::vector<NumberedToot> records;
  std::unordered_set<std::string> toot_ids;
  for (std::size_t i = 0; i < toots.size(); ++i) {
    if (!toot_ids.insert(toots[i].toot_id).second) {
      result.rejections.push_back({i + 1, "ParseError: duplicate toot_id " + toots[i].toot_id});
      continue;
    }
    records.push_back({i + 1, std::move(toots[i])});
    ++result.records_accepted;
  }
  group_into(result, std::move(records));
  return result;
}

InstanceCorpus filter_corpus(const InstanceCorpus& corpus, const std::set<std::string>& allowed_langs,
                             std::size_t min_posts) {
  if (min_posts < 1) throw ConfigError("min_posts must be >= 1");
  std::vector<ConversationTree> kept;
  for (const auto& tree : corpus.trees()) {
    if (!allowed_langs.empty() && !allowed_langs.count(tree.root().lang)) continue;
    if (tree.size() < min_posts) continue;
    kept.push_back(tree);
  }
  return InstanceCorpus(corpus.instance(), std::move(kept));
}

CorpusStats corpus_stats(const std::vector<InstanceCorpus>& corpora) {
  CorpusStats s;
  std::unordered_set<std::string> authors;
  for (const auto& c : corpora) {
    ++s.instances;
    s.conversations += c.trees().size();
    s.toots += c.toot_count();
    for (const auto& [user, _] : c.user_index()) authors.insert(user);
  }
  s.unique_authors = authors.size();
  return s;
}

void write_toot_jsonl(std::ostream& out, const Toot& t) {
  json j;
  j["toot_id"] = t.toot_id;
  j["conversation_id"] = t.conversation_id;
  j["parent_id"] = t.parent_id ? json(*t.parent_id) : json(nullptr);
  j["author_id"] = t.author_id;
  j["instance"] = t.instance;
  j["created_at"] = t.created_at;
  j["lang"] = t.lang;
  j["toxicity"] = t.toxicity;
  j["sentiment"] = t.sentiment;
  j["text"] = t.text ? json(*t.text) : json(nullptr);
  out << j.dump() << '\n';
}

void write_corpus_jsonl(std::ostream& out, const std::vector<InstanceCorpus>& corpora) {
  for (const auto& c : corpora)
    for (const auto& tree : c.trees())
      for (const auto& t : tree.toots()) write_toot_jsonl(out, t);
}

void write_rejections_csv(std::ostream& out, const std::vector<Rejection>& rejections) {
  out << "line,reason\n";
  for (const auto& r : rejections) out << r.line << ',' << detail::csv_field(r.reason) << '\n';
}

std::set<std::string> default_languages() { return {"en", "fr", "es", "it", "pt"}; }

}  // namespace fedtox
