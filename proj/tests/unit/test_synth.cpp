#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fedtox/convgraph.hpp"
#include "fedtox/corpus.hpp"
#include "fedtox/error.hpp"
#include "fedtox/labeling.hpp"
#include "fedtox/synth.hpp"

using namespace fedtox;

namespace {

SynthConfig small(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_instances = 3;
  c.conversations_per_instance = 120;
  c.users_per_instance = 60;
  c.seed = seed;
  return c;
}

std::vector<InstanceCorpus> corpora_of(const SynthCorpus& s) {
  auto r = group_records(s.toots);
  REQUIRE(r.rejections.empty());
  return r.corpora;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double mean_density(double shared_rate) {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = small(seed);
    cfg.n_instances = 1;
    cfg.shared_user_rate = shared_rate;
    for (const auto& c : corpora_of(generate(cfg))) total += density(build_graph(c));
  }
  return total / 5.0;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("same seed gives identical output") {
    auto a = generate(small());
    auto b = generate(small());
    std::ostringstream sa, sb;
    for (const auto& t : a.toots) write_toot_jsonl(sa, t);
    for (const auto& t : b.toots) write_toot_jsonl(sb, t);
    write_planted_csv(sa, a.planted);
    write_planted_csv(sb, b.planted);
    CHECK(sa.str() == sb.str());
    auto c = generate(small(4));
    CHECK(c.toots.size() != a.toots.size());
  }

  TEST_CASE("output parses into valid trees with scores in range") {
    auto s = generate(small());
    auto corpora = corpora_of(s);
    CHECK(corpora.size() == 3);
    std::size_t trees = 0;
    for (const auto& c : corpora) trees += c.trees().size();
    CHECK(trees == s.planted.size());
    for (const auto& t : s.toots) {
      CHECK(t.toxicity >= 0.0);
      CHECK(t.toxicity <= 1.0);
      CHECK(t.sentiment >= -1.0);
      CHECK(t.sentiment <= 1.0);
    }
  }

  TEST_CASE("realized prevalence is within two points") {
    auto cfg = small();
    cfg.conversations_per_instance = 500;
    auto s = generate(cfg);
    REQUIRE(s.planted.size() >= 1000);
    const double toxic = static_cast<double>(std::count_if(s.planted.begin(), s.planted.end(),
                                                           [](const PlantedLabel& p) { return p.label == Label::Toxic; }));
    CHECK(std::abs(toxic / static_cast<double>(s.planted.size()) - cfg.toxic_prevalence) <= 0.02);
  }

  TEST_CASE("full signal is recovered by the labeling rule") {
    auto cfg = small();
    cfg.signal_strength = 1.0;
    cfg.toxic_prevalence = 0.5;
    auto s = generate(cfg);
    std::map<std::string, Label> truth;
    for (const auto& p : s.planted) truth[p.conversation_id] = p.label;
    std::size_t right = 0, total = 0;
    for (const auto& c : corpora_of(s))
      for (const auto& l : label_corpus(c, ModerationPolicy{})) {
        right += l.label == truth.at(l.conversation_id);
        ++total;
      }
    CHECK(static_cast<double>(right) / static_cast<double>(total) >= 0.95);
  }

  TEST_CASE("zero signal gives identical toxicity distributions") {
    auto cfg = small();
    cfg.signal_strength = 0.0;
    cfg.conversations_per_instance = 400;
    cfg.toxic_prevalence = 0.5;
    auto s = generate(cfg);
    std::map<std::string, Label> truth;
    for (const auto& p : s.planted) truth[p.conversation_id] = p.label;
    std::vector<double> toxic, clean;
    for (const auto& t : s.toots) (truth.at(t.conversation_id) == Label::Toxic ? toxic : clean).push_back(t.toxicity);
    REQUIRE(toxic.size() + clean.size() >= 10000);
    // Two-sample critical value at alpha = 0.001 is about 1.95 * sqrt((n + m) / (n m)).
    const double n = static_cast<double>(toxic.size()), m = static_cast<double>(clean.size());
    CHECK(ks_statistic(toxic, clean) < 1.95 * std::sqrt((n + m) / (n * m)));
  }

  TEST_CASE("no shared users means no edges") {
    auto cfg = small();
    cfg.shared_user_rate = 0.0;
    for (const auto& c : corpora_of(generate(cfg))) CHECK(build_graph(c).edge_count() == 0);
  }

  TEST_CASE("more sharing gives denser graphs") {
    double prev = -1.0;
    for (double rate : {0.05, 0.2, 0.5, 0.9}) {
      const double d = mean_density(rate);
      CHECK(d > prev);
      prev = d;
    }
  }

  TEST_CASE("invalid configs") {
    auto cfg = small();
    cfg.toxic_prevalence = 1.0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = small();
    cfg.signal_strength = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}
