#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedtox/corpus.hpp"

namespace fedtox::testing {

inline Toot toot(std::string id, std::string conv, std::optional<std::string> parent, std::string author,
                 double toxicity = 0.1, std::int64_t created_at = 0, double sentiment = 0.0,
                 std::string instance = "inst.a") {
  Toot t;
  t.toot_id = std::move(id);
  t.conversation_id = std::move(conv);
  t.parent_id = std::move(parent);
  t.author_id = std::move(author);
  t.instance = std::move(instance);
  t.created_at = created_at;
  t.lang = "en";
  t.toxicity = toxicity;
  t.sentiment = sentiment;
  t.text = "post " + t.toot_id;
  return t;
}

/// A star-shaped tree: root by authors[0], one reply per further author.
inline ConversationTree star_tree(const std::string& conv, const std::vector<std::string>& authors,
                                  const std::string& instance = "inst.a") {
  std::vector<Toot> ts;
  for (std::size_t i = 0; i < authors.size(); ++i) {
    std::optional<std::string> parent;
    if (i > 0) parent = conv + "-0";
    ts.push_back(toot(conv + "-" + std::to_string(i), conv, parent, authors[i], 0.1,
                      static_cast<std::int64_t>(i * 10), 0.0, instance));
  }
  return build_tree(std::move(ts));
}

/// Root toxicity followed by reply toxicities, every reply attached to the root.
inline ConversationTree scored_tree(const std::string& conv, double root, const std::vector<double>& replies) {
  std::vector<Toot> ts{toot(conv + "-r", conv, std::nullopt, "u0", root)};
  for (std::size_t i = 0; i < replies.size(); ++i)
    ts.push_back(toot(conv + "-" + std::to_string(i), conv, conv + "-r", "u" + std::to_string(i + 1), replies[i],
                      static_cast<std::int64_t>(i + 1)));
  return build_tree(std::move(ts));
}

}  // namespace fedtox::testing
