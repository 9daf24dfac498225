#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedtox/corpus.hpp"
#include "fedtox/labeling.hpp"

namespace fedtox {

/// Synthetic multi-instance corpus with planted conversation-level toxicity.
struct SynthConfig {
  std::size_t n_instances = 20;
  std::size_t users_per_instance = 150;         // shared author pool per instance
  std::size_t conversations_per_instance = 400;
  double instance_size_spread = 0.5;            // conversation counts uniform in c*(1 +- spread)
  double mean_replies = 10.0;                   // geometric reply count per conversation
  double root_attach_prob = 0.4;                // otherwise a uniformly chosen earlier toot
  double toxic_prevalence = 0.3;
  double signal_strength = 0.9;
  double shared_user_rate = 0.3;
  double activity_exponent = 1.1;               // Zipf exponent of author activity
  double sentiment_noise = 0.15;
  double mean_reaction_seconds = 900.0;
  std::string lang = "en";
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

struct PlantedLabel {
  std::string conversation_id;
  std::string instance;
  Label label = Label::NonToxic;
};

struct SynthCorpus {
  std::vector<Toot> toots;  // grouped by instance, then conversation, in generation order
  std::vector<PlantedLabel> planted;
};

/// Toxicity ~ Beta(2 + 8s, 2) in planted-toxic conversations and Beta(2, 2 + 8s)
/// elsewhere; sentiment = clamp(1 - 2 * toxicity + noise, -1, 1). Authors come
/// from the instance pool with probability shared_user_rate, otherwise from a
/// conversation-local cast that never appears elsewhere.
SynthCorpus generate(const SynthConfig& config);

void write_planted_csv(std::ostream& out, const std::vector<PlantedLabel>& planted);

}  // namespace fedtox
