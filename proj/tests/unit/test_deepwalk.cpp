#include <doctest.h>

#include <cmath>

#include "fedtox/deepwalk.hpp"
#include "fedtox/error.hpp"
#include "helpers.hpp"

using namespace fedtox;
using fedtox::testing::toot;

namespace {

WalkConfig small_config() {
  WalkConfig c;
  c.walks_per_node = 4;
  c.walk_length = 8;
  c.window = 2;
  c.epochs = 2;
  c.dims = 16;
  return c;
}

ConversationTree path3() {
  return build_tree({toot("a", "c", std::nullopt, "u1", 0.1, 0), toot("b", "c", "a", "u2", 0.1, 1),
                     toot("d", "c", "b", "u3", 0.1, 2)});
}

}  // namespace

TEST_SUITE("deepwalk") {
  TEST_CASE("single toot walks repeat the node") {
    auto forest = TootForest::from_tree(build_tree({toot("r", "c", std::nullopt, "u")}));
    Rng rng(1);
    auto walks = generate_walks(forest, small_config(), rng);
    REQUIRE(walks.size() == 4);
    for (const auto& w : walks) {
      CHECK(w.size() == 8);
      for (auto n : w) CHECK(n == 0);
    }
  }

  TEST_CASE("walks follow reply edges") {
    auto forest = TootForest::from_tree(path3());
    Rng rng(2);
    for (const auto& w : generate_walks(forest, small_config(), rng))
      for (std::size_t i = 1; i < w.size(); ++i) {
        const auto& nb = forest.adjacency[w[i - 1]];
        CHECK(std::find(nb.begin(), nb.end(), w[i]) != nb.end());
      }
  }

  TEST_CASE("co-occurrence counts equal direct enumeration on a path") {
    auto forest = TootForest::from_tree(path3());
    WalkConfig c = small_config();
    c.window = 1;
    Rng rng(3);
    auto walks = generate_walks(forest, c, rng);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> direct;
    for (const auto& w : walks)
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i > 0) ++direct[{w[i], w[i - 1]}];
        if (i + 1 < w.size()) ++direct[{w[i], w[i + 1]}];
      }
    CHECK(skipgram_cooccurrence(walks, 1) == direct);
    // On a path with window 1 only adjacent toots co-occur.
    for (const auto& [pair, count] : direct) CHECK(pair.first != pair.second);
  }

  TEST_CASE("same seed gives identical embeddings; a different seed does not") {
    InstanceCorpus corpus("x", {path3()});
    auto a = deepwalk_embed(corpus, small_config(), 5);
    auto b = deepwalk_embed(corpus, small_config(), 5);
    auto c = deepwalk_embed(corpus, small_config(), 6);
    REQUIRE(a.size() == 3);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t d = 0; d < a.dims(); ++d) {
        CHECK(a.row(i)[d] == b.row(i)[d]);
        CHECK(std::isfinite(a.row(i)[d]));
        differs = differs || a.row(i)[d] != c.row(i)[d];
      }
    CHECK(differs);
  }

  TEST_CASE("singleton trees get finite embeddings") {
    InstanceCorpus corpus("x", {build_tree({toot("r", "c", std::nullopt, "u")})});
    auto e = deepwalk_embed(corpus, small_config(), 1);
    for (double v : e.at("r")) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(e.at("missing"), MissingEmbedding);
  }

  TEST_CASE("neighbours end up closer than strangers") {
    // Two separate 6-toot chains: toots within a chain share contexts.
    std::vector<ConversationTree> trees;
    for (std::string c : {"p", "q"}) {
      std::vector<Toot> ts{toot(c + "0", c, std::nullopt, "u", 0.1, 0)};
      for (int i = 1; i < 6; ++i)
        ts.push_back(toot(c + std::to_string(i), c, c + std::to_string(i - 1), "u", 0.1, i));
      trees.push_back(build_tree(ts));
    }
    WalkConfig cfg = small_config();
    cfg.walks_per_node = 20;
    cfg.epochs = 5;
    auto e = deepwalk_embed(InstanceCorpus("x", trees), cfg, 9);
    auto cosine = [&](const std::string& a, const std::string& b) {
      auto x = e.at(a), y = e.at(b);
      double d = 0, nx = 0, ny = 0;
      for (std::size_t i = 0; i < x.size(); ++i) d += x[i] * y[i], nx += x[i] * x[i], ny += y[i] * y[i];
      return d / std::sqrt(nx * ny);
    };
    CHECK(cosine("p2", "p3") > cosine("p2", "q3"));
  }

  TEST_CASE("invalid configs") {
    WalkConfig c;
    c.window = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = WalkConfig{};
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}
