#include "fedtox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "csv_util.hpp"
#include "fedtox/error.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

void SynthConfig::validate() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (n_instances < 1 || users_per_instance < 1 || conversations_per_instance < 1)
    throw ConfigError("synthetic corpus counts must be >= 1");
  if (!(toxic_prevalence > 0.0 && toxic_prevalence < 1.0)) throw ConfigError("toxic_prevalence must be in (0,1)");
  if (!in01(signal_strength)) throw ConfigError("signal_strength must be in [0,1]");
  if (!in01(shared_user_rate)) throw ConfigError("shared_user_rate must be in [0,1]");
  if (!in01(root_attach_prob)) throw ConfigError("root_attach_prob must be in [0,1]");
  if (!(instance_size_spread >= 0.0 && instance_size_spread < 1.0))
    throw ConfigError("instance_size_spread must be in [0,1)");
  if (mean_replies < 0.0 || sentiment_noise < 0.0 || mean_reaction_seconds <= 0.0 || activity_exponent < 0.0)
    throw ConfigError("synthetic corpus rates must be non-negative");
}

namespace {

std::string padded(const char* prefix, std::size_t v, int width) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, v);
  return buf;
}

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  SynthCorpus out;
  const double s = config.signal_strength;
  const std::int64_t epoch = 1672531200;  // 2023-01-01

  for (std::size_t inst = 0; inst < config.n_instances; ++inst) {
    Rng rng(derive_seed({config.seed, inst, 0x5e7}));
    const std::string instance = padded("inst", inst, 2) + ".example";

    const double spread = config.instance_size_spread;
    const double scale = 1.0 + spread * (2.0 * rng.uniform() - 1.0);
    const std::size_t n_conv = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(config.conversations_per_instance) * scale)));
    const auto n_toxic = static_cast<std::size_t>(std::llround(config.toxic_prevalence * static_cast<double>(n_conv)));
    if (n_toxic > n_conv) throw ConfigError("more planted-toxic conversations than conversations");
    std::vector<char> planted(n_conv, 0);
    for (std::size_t i : rng.sample_indices(n_conv, n_toxic)) planted[i] = 1;

    std::vector<double> activity_cdf(config.users_per_instance);
    double acc = 0.0;
    for (std::size_t u = 0; u < config.users_per_instance; ++u) {
      acc += 1.0 / std::pow(static_cast<double>(u + 1), config.activity_exponent);
      activity_cdf[u] = acc;
    }
    auto pool_user = [&]() {
      const double x = rng.uniform() * acc;
      auto it = std::upper_bound(activity_cdf.begin(), activity_cdf.end(), x);
      const auto u = std::min<std::size_t>(static_cast<std::size_t>(it - activity_cdf.begin()), activity_cdf.size() - 1);
      return padded("", inst, 2) + padded("-u", u, 4);
    };

    for (std::size_t c = 0; c < n_conv; ++c) {
      const std::string conv = padded("i", inst, 2) + padded("-c", c, 5);
      const bool toxic = planted[c] != 0;
      out.planted.push_back({conv, instance, toxic ? Label::Toxic : Label::NonToxic});

      std::vector<std::string> local_cast;
      auto pick_author = [&](bool allow_local_reuse) {
        if (rng.bernoulli(config.shared_user_rate)) return pool_user();
        if (allow_local_reuse && !local_cast.empty() && rng.bernoulli(0.5))
          return local_cast[rng.index(local_cast.size())];
        local_cast.push_back(conv + padded("-p", local_cast.size(), 2));
        return local_cast.back();
      };

      const std::size_t replies = rng.geometric(config.mean_replies);
      std::vector<std::int64_t> times;
      const std::size_t base = out.toots.size();
      for (std::size_t k = 0; k <= replies; ++k) {
        Toot t;
        t.toot_id = conv + padded("-t", k, 3);
        t.conversation_id = conv;
        t.instance = instance;
        t.lang = config.lang;
        std::int64_t parent_time;
        if (k == 0) {
          parent_time = epoch + static_cast<std::int64_t>(rng.uniform() * 30.0 * 86400.0);
          t.created_at = parent_time;
          t.author_id = pick_author(false);
        } else {
          const std::size_t parent = rng.bernoulli(config.root_attach_prob) ? 0 : rng.index(k);
          t.parent_id = out.toots[base + parent].toot_id;
          parent_time = times[parent];
          t.created_at = parent_time + 1 + static_cast<std::int64_t>(rng.exponential(config.mean_reaction_seconds));
          t.author_id = pick_author(true);
        }
        times.push_back(t.created_at);
        t.toxicity = toxic ? rng.beta(2.0 + 8.0 * s, 2.0) : rng.beta(2.0, 2.0 + 8.0 * s);
        t.sentiment = std::clamp(1.0 - 2.0 * t.toxicity + rng.normal(0.0, config.sentiment_noise), -1.0, 1.0);
        t.text = "<p>synthetic post " + std::to_string(k) + " in " + conv + "</p>";
        out.toots.push_back(std::move(t));
      }
    }
  }
  return out;
}

void write_planted_csv(std::ostream& out, const std::vector<PlantedLabel>& planted) {
  out << "conversation_id,instance,planted_label\n";
  for (const auto& p : planted)
    out << detail::csv_field(p.conversation_id) << ',' << detail::csv_field(p.instance) << ',' << to_string(p.label)
        << '\n';
}

}  // namespace fedtox
