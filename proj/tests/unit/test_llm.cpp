#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fedtox/error.hpp"
#include "fedtox/llm_baseline.hpp"
#include "helpers.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace fedtox;
using fedtox::testing::toot;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(FEDTOX_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

FewShotSet golden_fewshot() {
  FewShotSet fs;
  for (int i = 1; i <= 10; ++i) {
    fs.toxic.push_back("toxic example " + std::to_string(i) + ": you are all idiots");
    fs.nontoxic.push_back("calm example " + std::to_string(i) + ": thanks for sharing");
  }
  return fs;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<LabeledConversation> labeled_source(const std::string& instance, std::size_t per_class) {
  std::vector<LabeledConversation> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    out.push_back({instance + "-t" + std::to_string(i), instance, instance + " rude " + std::to_string(i), Label::Toxic});
    out.push_back({instance + "-n" + std::to_string(i), instance, instance + " kind " + std::to_string(i),
                   Label::NonToxic});
  }
  return out;
}

std::vector<LabeledInstance> instances(std::size_t n, std::size_t per_class) {
  std::vector<LabeledInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "inst" + std::to_string(10 + i);
    out.push_back({id, labeled_source(id, per_class)});
  }
  return out;
}

std::map<std::string, Label> truth_of(const std::vector<LabeledInstance>& insts) {
  std::map<std::string, Label> truth;
  for (const auto& i : insts)
    for (const auto& c : i.conversations) truth[c.text] = c.label;
  return truth;
}

// Replays a fixed list of completions.
class ScriptedTransport final : public CompletionTransport {
 public:
  explicit ScriptedTransport(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string generate(const std::string&) override {
    ++calls;
    return replies_.at(std::min(calls - 1, replies_.size() - 1));
  }
  std::size_t calls = 0;

 private:
  std::vector<std::string> replies_;
};

}  // namespace

TEST_SUITE("llm") {
  TEST_CASE("template matches the golden copy") {
    CHECK(std::string(kPromptTemplate) == read_golden("prompt_template.txt"));
  }

  TEST_CASE("rendered prompt matches the golden file byte for byte") {
    const std::string conv = "alice: <b>not</b> rendered\nbob: plain reply";
    const auto prompt = build_prompt(golden_fewshot(), conv);
    CHECK(prompt == read_golden("prompt_rendered.txt"));
    CHECK(build_prompt(golden_fewshot(), conv) == prompt);
  }

  TEST_CASE("prompt holds twenty example label lines plus the format line") {
    const auto prompt = build_prompt(golden_fewshot(), "u1: hello");
    CHECK(count_substr(prompt, "\nLABEL: TOXIC\n") == 10);
    CHECK(count_substr(prompt, "\nLABEL: NON-TOXIC\n") == 10);
    std::size_t label_lines = 0;
    std::istringstream in(prompt);
    for (std::string line; std::getline(in, line);)
      if (line.rfind("LABEL:", 0) == 0) ++label_lines;
    CHECK(label_lines == 21);
  }

  TEST_CASE("few-shot sets must be complete") {
    FewShotSet empty;
    CHECK_THROWS_AS(build_prompt(empty, "x"), ConfigError);
    auto fs = golden_fewshot();
    fs.toxic.pop_back();
    CHECK_THROWS_AS(fs.validate(), ConfigError);
    CHECK_THROWS_AS(build_prompt(fs, "x"), ConfigError);
  }

  TEST_CASE("clean_text") {
    auto one = build_tree({[] {
      auto t = toot("r", "c", std::nullopt, "u1");
      t.text = "hello";
      return t;
    }()});
    CHECK(clean_text(one) == "u1: hello");
    CHECK(strip_html("<p>hi</p>") == "hi");
    CHECK(strip_html("a<br>b  &amp;\n c &lt;3") == "a b & c <3");

    auto a = toot("a", "c", std::nullopt, "u1", 0.1, 30);
    auto b = toot("b", "c", "a", "u2", 0.1, 10);  // earlier than its parent on purpose
    auto c = toot("d", "c", "a", "u3", 0.1, 20);
    a.text = "<p>third</p>";
    b.text = "first";
    c.text = "second";
    CHECK(clean_text(build_tree({a, b, c})) == "u2: first\nu3: second\nu1: third");

    auto blank = toot("r", "c", std::nullopt, "u1");
    blank.text = "<p> </p>";
    CHECK_THROWS_AS(clean_text(build_tree({blank})), EmptyConversation);
    blank.text.reset();
    CHECK_THROWS_AS(clean_text(build_tree({blank})), EmptyConversation);
  }

  TEST_CASE("truncation keeps the budget and utf-8 boundaries") {
    auto t = toot("r", "c", std::nullopt, "u");
    t.text = std::string(100, 'x');
    auto tree = build_tree({t});
    auto cut = clean_text(tree, 40);
    CHECK(cut.size() == 40);
    CHECK(cut.substr(cut.size() - kTruncationMarker.size()) == kTruncationMarker);
    CHECK(clean_text(tree, 1000).size() == 103);

    t.text = "";
    for (int i = 0; i < 30; ++i) t.text->append("\xc3\xa9");  // é
    auto utf = clean_text(build_tree({t}), 20);
    const auto body = utf.substr(0, utf.size() - kTruncationMarker.size());
    CHECK(body.size() <= 20 - kTruncationMarker.size());
    CHECK((body.size() - 3) % 2 == 0);  // "u: " then whole two-byte characters
    CHECK_THROWS_AS(clean_text(tree, kTruncationMarker.size()), ConfigError);
  }

  TEST_CASE("completion parsing") {
    auto clean = parse_completion("LABEL: TOXIC\nREASON: slurs");
    REQUIRE(clean);
    CHECK(clean->label == Label::Toxic);
    CHECK(clean->reason == "slurs");
    CHECK(clean->status == ParseStatus::Clean);

    auto recovered = parse_completion("I think LABEL: NON-TOXIC because it is friendly");
    REQUIRE(recovered);
    CHECK(recovered->label == Label::NonToxic);
    CHECK(recovered->status == ParseStatus::Recovered);

    auto lower = parse_completion("label: nontoxic");
    REQUIRE(lower);
    CHECK(lower->label == Label::NonToxic);

    auto later = parse_completion("Sure.\nLABEL: TOXIC\nREASON: threats");
    REQUIRE(later);
    CHECK(later->label == Label::Toxic);
    CHECK(later->status == ParseStatus::Recovered);

    CHECK_FALSE(parse_completion("I cannot assist"));
    CHECK_FALSE(parse_completion("LABEL: INCONCLUSIVE"));
    CHECK_FALSE(parse_completion(""));
  }

  TEST_CASE("classify retries once then defaults") {
    ScriptedTransport refuse({"I cannot assist"});
    auto v = classify(refuse, "p");
    CHECK(v.label == Label::NonToxic);
    CHECK(v.status == ParseStatus::Defaulted);
    CHECK(refuse.calls == 2);

    ScriptedTransport second({"hmm", "LABEL: TOXIC"});
    auto w = classify(second, "p");
    CHECK(w.label == Label::Toxic);
    CHECK(w.attempts == 2);
  }

  TEST_CASE("few-shot sampling") {
    auto exact = labeled_source("x", 10);
    auto s = sample_fewshot(exact, 0, 1);
    CHECK(s.fewshot.toxic.size() == 10);
    CHECK(s.fewshot.nontoxic.size() == 10);
    std::set<std::string> all;
    for (const auto& t : s.fewshot.toxic) all.insert(t);
    for (const auto& t : s.fewshot.nontoxic) all.insert(t);
    CHECK(all.size() == 20);
    CHECK(s.rest_indices.empty());

    auto big = labeled_source("y", 50);
    auto a = sample_fewshot(big, 10, 1);
    auto b = sample_fewshot(big, 10, 42);
    CHECK(a.fewshot.toxic != b.fewshot.toxic);
    for (const auto& split : {a, b}) {
      std::set<std::size_t> fs(split.fewshot_indices.begin(), split.fewshot_indices.end());
      for (auto i : split.test_indices) CHECK(fs.count(i) == 0);
      for (auto i : split.rest_indices) CHECK(fs.count(i) == 0);
      CHECK(split.test_indices.size() == 20);
      std::size_t toxic_tests = 0;
      for (auto i : split.test_indices) toxic_tests += big[i].label == Label::Toxic;
      CHECK(toxic_tests == 10);
    }
    CHECK(sample_fewshot(big, 10, 1).fewshot.toxic == a.fewshot.toxic);
    CHECK_THROWS_AS(sample_fewshot(labeled_source("z", 12), 5, 1), InstanceIneligible);
  }

  TEST_CASE("labeled_instance pairs texts with labels") {
    auto a = toot("a", "c1", std::nullopt, "u1");
    auto b = toot("b", "c2", std::nullopt, "u2");
    b.text.reset();
    InstanceCorpus corpus("x", {build_tree({a}), build_tree({b})});
    auto li = labeled_instance(corpus, {{"c1", Label::Toxic, LabelReason::RootToxic}, {"c2", Label::NonToxic, LabelReason::Clean}});
    REQUIRE(li.conversations.size() == 1);
    CHECK(li.conversations[0].text == "u1: post a");
    CHECK(li.conversations[0].label == Label::Toxic);
  }

  TEST_CASE("split is disjoint and balanced") {
    auto insts = instances(12, 30);
    LlmEvalConfig cfg;
    auto split = prepare_llm_split(insts, cfg, 1);
    CHECK(split.instances.size() == 10);
    CHECK(split.global_test.size() == 100);
    std::set<std::string> fewshot_texts;
    for (const auto& l : split.local) {
      for (const auto& t : l.fewshot.toxic) fewshot_texts.insert(t);
      for (const auto& t : l.fewshot.nontoxic) fewshot_texts.insert(t);
    }
    for (const auto& c : split.global_test) CHECK(fewshot_texts.count(c.text) == 0);
    for (const auto& t : split.pooled_fewshot.toxic) CHECK(fewshot_texts.count(t) == 1);
    CHECK(split.pooled_fewshot.origin == FewShotOrigin::Pooled);
    auto other = prepare_llm_split(insts, cfg, 42);
    CHECK((other.instances[0].instance != split.instances[0].instance ||
           other.global_test[0].text != split.global_test[0].text));
    CHECK_THROWS_AS(prepare_llm_split(instances(3, 15), cfg, 1), InstanceIneligible);
  }

  TEST_CASE("oracle endpoint scores 1 in every setup; always NonToxic scores 1/3") {
    auto insts = instances(12, 30);
    LlmEvalConfig cfg;
    cfg.seeds = {1, 42};
    OracleTransport oracle(truth_of(insts));
    auto report = run_llm_evaluation(insts, cfg, oracle);
    REQUIRE(report.summary.size() == 3);
    for (const auto& s : report.summary) {
      CHECK(s.macro_f1.mean == 1.0);
      CHECK(s.macro_f1.std == 0.0);
      CHECK(s.refusals == 0);
    }

    OracleTransport lazy(truth_of(insts), {}, Label::NonToxic);
    auto flat = run_llm_evaluation(insts, cfg, lazy);
    for (const auto& s : flat.summary) {
      CHECK(s.macro_f1.mean == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
      CHECK(s.toxic_recall.mean == 0.0);
    }
  }

  TEST_CASE("refusal counts equal the injected refusals") {
    auto insts = instances(12, 30);
    LlmEvalConfig cfg;
    cfg.max_in_flight = 3;
    auto split = prepare_llm_split(insts, cfg, 1);
    std::set<std::string> refuse;
    for (std::size_t i = 0; i < split.global_test.size(); i += 9) refuse.insert(split.global_test[i].text);
    std::size_t local_refused = 0;
    for (std::size_t k = 0; k < split.local.size(); ++k) {
      const auto& test = split.local[k].test_indices;
      refuse.insert(split.instances[k].conversations[test[k % test.size()]].text);
      ++local_refused;
    }
    const std::size_t global_refused = (split.global_test.size() + 8) / 9;
    OracleTransport oracle(truth_of(insts), refuse);
    auto global = run_global_setup(split, oracle, 3);
    CHECK(global.refusals == global_refused);
    CHECK(global.classified == split.global_test.size());
    auto local = run_local_setup(split, oracle, false, 2);
    CHECK(local.refusals == local_refused);
    auto local_global = run_local_setup(split, oracle, true);
    CHECK(local_global.refusals == global_refused * split.instances.size());
  }

  TEST_CASE("http transport speaks the generate protocol") {
    httplib::Server server;
    nlohmann::json seen;
    server.Post("/api/generate", [&](const httplib::Request& req, httplib::Response& res) {
      seen = nlohmann::json::parse(req.body);
      res.set_content(R"({"model":"m","response":"LABEL: TOXIC\nREASON: insults","done":true})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/";
    cfg.model = "tiny:1b";
    cfg.timeout_seconds = 5;
    auto transport = make_http_transport(cfg);
    auto v = classify(*transport, "the prompt");
    server.stop();
    thread.join();

    CHECK(v.label == Label::Toxic);
    CHECK(v.reason == "insults");
    CHECK(seen["model"] == "tiny:1b");
    CHECK(seen["prompt"] == "the prompt");
    CHECK(seen["stream"] == false);
  }

  TEST_CASE("unreachable endpoint and bad urls") {
    EndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";
    cfg.max_retries = 0;
    cfg.timeout_seconds = 1;
    auto transport = make_http_transport(cfg);
    CHECK_THROWS_AS(transport->generate("x"), EndpointUnavailable);
    cfg.base_url = "https://example.org";
    CHECK_THROWS_AS(make_http_transport(cfg), ConfigError);
  }

  TEST_CASE("setup names") {
    CHECK(parse_setup("local-global") == LlmSetup::LocalGlobal);
    CHECK_THROWS_AS(parse_setup("both"), ConfigError);
  }
}
