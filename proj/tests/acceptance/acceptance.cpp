// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedtox/config.hpp"
#include "fedtox/convgraph.hpp"
#include "fedtox/error.hpp"
#include "fedtox/features.hpp"
#include "fedtox/federation.hpp"
#include "fedtox/graphsage.hpp"
#include "fedtox/grid.hpp"
#include "fedtox/labeling.hpp"
#include "fedtox/llm_baseline.hpp"
#include "fedtox/log.hpp"
#include "fedtox/pipeline.hpp"
#include "fedtox/report.hpp"
#include "fedtox/rng.hpp"
#include "fedtox/synth.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "nc_oracle.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace fedtox;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

// ---------------------------------------------------------------- labeling

Label labeling_oracle(double root, const std::vector<double>& replies, const ModerationPolicy& p) {
  if (root > p.thr_root) return Label::Toxic;
  if (replies.empty()) return Label::NonToxic;
  double toxic = 0.0;
  for (double r : replies)
    if (r > p.thr_root) toxic += 1.0;
  const bool enough = toxic > static_cast<double>(p.thr_number);
  const bool dense = toxic / static_cast<double>(replies.size()) > p.thr_fraction;
  return enough && dense ? Label::Toxic : Label::NonToxic;
}

Outcome labeling_equivalence() {
  Rng rng(101);
  struct Case {
    ConversationTree tree;
    double root;
    std::vector<double> replies;
  };
  std::vector<Case> cases;
  cases.reserve(10000);
  for (std::size_t i = 0; i < 10000; ++i) {
    const std::string conv = "c" + std::to_string(i);
    const std::size_t n_replies = rng.index(15);
    std::vector<Toot> toots{testing::toot(conv + "-0", conv, std::nullopt, "u0", rng.uniform())};
    for (std::size_t k = 1; k <= n_replies; ++k)
      toots.push_back(testing::toot(conv + "-" + std::to_string(k), conv, conv + "-" + std::to_string(rng.index(k)),
                                    "u" + std::to_string(rng.index(6)), rng.uniform(), static_cast<std::int64_t>(k)));
    Case c{build_tree(toots), toots[0].toxicity, {}};
    for (std::size_t k = 1; k < toots.size(); ++k) c.replies.push_back(toots[k].toxicity);
    cases.push_back(std::move(c));
  }
  std::size_t mismatches = 0, toxic = 0;
  for (std::size_t p = 0; p < 100; ++p) {
    ModerationPolicy policy;
    policy.thr_root = rng.uniform();
    policy.thr_number = rng.index(5);
    policy.thr_fraction = rng.uniform(0.0, 0.6);
    for (const auto& c : cases) {
      const Label got = label_conversation(c.tree, policy).label;
      if (got != labeling_oracle(c.root, c.replies, policy)) ++mismatches;
      if (got == Label::Toxic) ++toxic;
    }
  }
  return {mismatches == 0,
          "10000 trees x 100 policies, " + std::to_string(mismatches) + " mismatches, " + std::to_string(toxic) +
              " toxic labels"};
}

// ---------------------------------------------------------------- graph

InstanceCorpus random_corpus(Rng& rng, std::size_t conversations, std::size_t pool) {
  std::vector<ConversationTree> trees;
  for (std::size_t c = 0; c < conversations; ++c) {
    const std::string conv = "c" + std::to_string(c);
    const std::size_t n = 1 + rng.index(8);
    std::vector<Toot> toots;
    for (std::size_t k = 0; k < n; ++k) {
      std::optional<std::string> parent;
      if (k > 0) parent = conv + "-" + std::to_string(rng.index(k));
      toots.push_back(testing::toot(conv + "-" + std::to_string(k), conv, parent, "u" + std::to_string(rng.index(pool)),
                                    0.1, static_cast<std::int64_t>(k)));
    }
    trees.push_back(build_tree(toots));
  }
  return InstanceCorpus("inst.a", std::move(trees));
}

bool graph_matches_brute_force(const InstanceCorpus& corpus) {
  const auto g = build_graph(corpus);
  const auto& trees = corpus.trees();
  if (g.node_count() != trees.size()) return false;
  std::vector<std::set<std::string>> people;
  for (const auto& t : trees) {
    std::set<std::string> s;
    for (const auto& toot : t.toots()) s.insert(toot.author_id);
    people.push_back(std::move(s));
  }
  std::vector<Edge> expected;
  for (std::size_t i = 0; i < trees.size(); ++i)
    for (std::size_t j = i + 1; j < trees.size(); ++j) {
      std::int64_t shared = 0;
      for (const auto& a : people[i]) shared += static_cast<std::int64_t>(people[j].count(a));
      if (shared > 0) expected.push_back({i, j, shared});
    }
  return g.edges() == expected;
}

Outcome graph_correctness() {
  // Two conversations with three participants in common.
  auto a = testing::star_tree("x", {"ann", "bob", "cat", "dan"});
  auto b = testing::star_tree("y", {"bob", "cat", "dan", "eve"});
  const auto fixture = build_graph(InstanceCorpus("inst.a", {a, b}));
  const bool fixture_ok = fixture.edge_count() == 1 && fixture.edges()[0].weight == 3;

  Rng rng(202);
  std::size_t failures = 0;
  const std::size_t trials = 300;
  for (std::size_t t = 0; t < trials; ++t)
    if (!graph_matches_brute_force(random_corpus(rng, 1 + rng.index(50), 5 + rng.index(60)))) ++failures;
  return {fixture_ok && failures == 0, "fixture weight " + std::to_string(fixture.edges().empty() ? 0 : fixture.edges()[0].weight) +
                                           ", " + std::to_string(trials) + " random corpora, " +
                                           std::to_string(failures) + " mismatches"};
}

// ---------------------------------------------------------------- backbone

Outcome nc_oracle_agreement() {
  Rng rng(303);
  double worst = 0.0;
  std::size_t graphs = 0, monotone_failures = 0;
  const std::vector<double> deltas{0.0, 0.5, 1.0, 1.64, 2.0, 3.0, 5.0};
  while (graphs < 1000) {
    const std::size_t n = 3 + rng.index(28);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
    std::vector<Edge> edges;
    const double p = rng.uniform(0.1, 0.9);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.bernoulli(p)) edges.push_back({i, j, static_cast<std::int64_t>(1 + rng.index(12))});
    if (edges.size() < 2) continue;
    ConversationGraph g("g", ids, edges);
    ++graphs;

    std::vector<testing::OracleEdge> oe;
    for (const auto& e : g.edges()) oe.push_back({e.u, e.v, static_cast<double>(e.weight)});
    const auto expected = testing::nc_oracle(n, oe);
    const auto got = nc_scores(g);
    for (std::size_t k = 0; k < got.size(); ++k) {
      for (auto [x, y] : {std::pair{got[k].nc_score, expected[k].score}, std::pair{got[k].sdev, expected[k].sdev}}) {
        const double scale = std::max(std::abs(x), std::abs(y));
        if (scale > 1e-300) worst = std::max(worst, std::abs(x - y) / scale);
      }
    }

    std::set<std::pair<NodeId, NodeId>> previous;
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      std::set<std::pair<NodeId, NodeId>> current;
      const auto kept = extract_backbone(g, got, deltas[d]);
      for (const auto& e : kept.edges()) current.insert({e.u, e.v});
      if (d > 0 && !std::includes(previous.begin(), previous.end(), current.begin(), current.end()))
        ++monotone_failures;
      previous = std::move(current);
    }
  }
  return {worst <= 1e-10 && monotone_failures == 0,
          std::to_string(graphs) + " graphs, max relative error " + sci(worst) + ", " +
              std::to_string(monotone_failures) + " monotonicity violations"};
}

Outcome backbone_shape() {
  std::size_t graphs = 0, failures = 0;
  double node_ret = 0.0, edge_ret = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig s;
    s.n_instances = 4;
    s.shared_user_rate = 0.3;
    s.seed = seed;
    for (const auto& corpus : group_records(generate(s).toots).corpora) {
      const auto g = build_graph(filter_corpus(corpus, default_languages(), 5));
      const auto bb = backbone_graph(g, kDefaultBackboneDelta);
      ++graphs;
      const auto& r = bb.retention;
      if (bb.degenerate || !(r.density_after < r.density_before) || !(r.node_retention >= r.edge_retention)) ++failures;
      node_ret += r.node_retention;
      edge_ret += r.edge_retention;
    }
  }
  return {failures == 0 && graphs > 0, std::to_string(graphs) + " instance graphs over 5 seeds, mean node retention " +
                                           fmt(node_ret / static_cast<double>(graphs)) + ", mean edge retention " +
                                           fmt(edge_ret / static_cast<double>(graphs)) + ", " +
                                           std::to_string(failures) + " violations"};
}

// ---------------------------------------------------------------- features

Outcome feature_contract() {
  SynthConfig s;
  s.n_instances = 1;
  s.conversations_per_instance = 60;
  const auto corpus = filter_corpus(group_records(generate(s).toots).corpora.at(0), default_languages(), 1);
  FeatureConfig cfg;
  cfg.walk.walks_per_node = 2;
  cfg.walk.walk_length = 10;
  cfg.walk.epochs = 1;
  bool ok = true;
  const auto full = extract_features(corpus, cfg, 1);
  ok = ok && full.values.cols() == 401 && full.values.rows() == static_cast<Eigen::Index>(corpus.trees().size());
  std::size_t combos = 0;
  for (int mask = 1; mask < 16; ++mask) {
    cfg.toggles = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
    const Eigen::Index expected = 384 * (mask & 1 ? 1 : 0) + 9 * (mask & 2 ? 1 : 0) + 5 * (mask & 4 ? 1 : 0) +
                                  3 * (mask & 8 ? 1 : 0);
    ok = ok && extract_features(corpus, cfg, 1).values.cols() == expected;
    ++combos;
  }

  std::vector<Toot> ts;
  const std::vector<double> sentiments{0.5, -0.5, 0.0};
  for (std::size_t i = 0; i < sentiments.size(); ++i) {
    std::optional<std::string> parent;
    if (i > 0) parent = "t0";
    ts.push_back(testing::toot("t" + std::to_string(i), "c", parent, "u" + std::to_string(i), 0.1,
                               static_cast<std::int64_t>(i), sentiments[i]));
  }
  const auto sent = sentiment_features(build_tree(ts));
  const double drift = sent[3], volatility = sent[4];
  ok = ok && std::abs(drift - 1.0) <= 1e-9 && std::abs(volatility - std::sqrt(1.0 / 6.0)) <= 1e-9;
  return {ok, "full width " + std::to_string(full.values.cols()) + ", " + std::to_string(combos) +
                  " group combinations checked, drift " + fmt(drift, 12) + ", volatility " + fmt(volatility, 12)};
}

// ---------------------------------------------------------------- gradients

Outcome gradient_correctness() {
  double worst = 0.0;
  std::size_t params = 0;
  const std::vector<testing::GradFixture> fixtures{
      testing::random_grad_fixture(11), testing::random_grad_fixture(12, 8, 5, 6),
      testing::random_grad_fixture(13, 10, 3, 4, 3), testing::random_grad_fixture(14, 7, 6, 3, 1)};
  for (const auto& f : fixtures) {
    const auto r = testing::gradient_check(f, 1e-5);
    worst = std::max(worst, r.max_relative_error);
    params += r.parameters;
  }
  return {worst < 1e-4, std::to_string(fixtures.size()) + " graphs, " + std::to_string(params) +
                            " parameters, max relative error " + sci(worst)};
}

// ---------------------------------------------------------------- fedavg

ClientData separable_client(const std::string& id, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back(id + "-" + std::to_string(i));
    if (i + 1 < n) edges.push_back({i, i + 1, 1});
  }
  ClientData c;
  c.client_id = id;
  c.graph = SageGraph::from(ConversationGraph(id, nodes, edges));
  c.features.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = rng.bernoulli(0.4) ? Label::Toxic : Label::NonToxic;
    c.labels.push_back(l);
    const auto r = static_cast<Eigen::Index>(i);
    c.features(r, 0) = (l == Label::Toxic ? 1.0 : -1.0) + 0.3 * rng.normal();
    c.features(r, 1) = rng.normal();
    c.features(r, 2) = rng.uniform();
  }
  return c;
}

Outcome fedavg_degeneracy() {
  FederationConfig cfg;
  cfg.rounds = 4;
  cfg.clients_per_round = 1;
  cfg.hidden = 8;
  cfg.train.learning_rate = 0.01;
  cfg.train.local_epochs = 2;

  // Full participation of one client: each round is exactly one local run.
  const auto states = prepare_clients(std::vector<ClientData>{separable_client("solo", 50, 3)}, cfg);
  const auto fed = run_federation(states, cfg);
  SageModel direct = fed.initial;
  const auto& c = states.front();
  for (std::size_t round = 0; round < cfg.rounds; ++round)
    direct = train_local(c.graph, c.features, c.labels, c.train_mask, direct, cfg.train,
                         derive_seed({cfg.seed, round, hash_string(c.client_id)}))
                 .model;
  const bool single = fed.global == direct;

  cfg.clients_per_round = 2;
  const std::vector<ClientState> twins{states[0], states[0]};
  const bool twin = run_federation(twins, cfg).global == direct;

  SageShape shape{2, 3, 1};
  SageModel a(shape), b(shape), d(shape);
  Rng rng(7);
  for (Eigen::Index i = 0; i < a.parameters().size(); ++i) {
    a.parameters()(i) = static_cast<double>(rng.index(64)) / 8.0;
    b.parameters()(i) = static_cast<double>(rng.index(64)) / 8.0;
  }
  const std::vector<SageModel> models{a, b};
  const std::vector<double> weights{1.0, 3.0};
  const auto mean = fedavg_aggregate(models, weights);
  d.parameters() = (a.parameters() + 3.0 * b.parameters()) / 4.0;
  const bool weighted = mean == d;

  return {single && twin && weighted, std::string("single client ") + (single ? "bit-exact" : "differs") +
                                          ", identical clients " + (twin ? "bit-exact" : "differ") +
                                          ", weighted mean " + (weighted ? "exact" : "inexact")};
}

// ---------------------------------------------------------------- end to end

// Shared by the signal, participation and train-cap criteria. DeepWalk runs
// with fewer walks than the pipeline default and local training uses a larger
// step, so the fifteen federations finish in minutes on one core.
PipelineConfig end_to_end_config(std::uint64_t seed) {
  PipelineConfig p;
  p.features.walk.walks_per_node = 2;
  p.features.walk.walk_length = 10;
  p.features.walk.epochs = 1;
  p.federation.rounds = 50;
  p.federation.clients_per_round = 10;
  p.federation.train.learning_rate = 1e-3;
  p.federation.seed = seed;
  return p;
}

struct EndToEnd {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::map<std::string, std::vector<double>> f1;  // run name -> per seed
  std::vector<std::size_t> caps{20, 50, 100, 200};
  std::vector<std::vector<std::size_t>> eligible;  // per seed, aligned with caps
  double slowest_run = 0.0;
  std::string error;
};

double federate(const PreparedClients& prepared, const FederationConfig& cfg) {
  const auto states = prepare_clients(prepared.clients, cfg);
  return run_federation(states, cfg).final_report().macro_f1();
}

EndToEnd run_end_to_end() {
  EndToEnd out;
  try {
    SynthConfig s;
    s.signal_strength = 0.9;
    s.toxic_prevalence = 0.3;
    const auto corpora = group_records(generate(s).toots).corpora;
    for (std::uint64_t seed : out.seeds) {
      const PipelineConfig p = end_to_end_config(seed);
      auto start = Clock::now();
      const auto prepared = prepare_client_data(corpora, p, seed);
      const double prep_time = seconds_since(start);

      auto timed = [&](const std::string& name, const FederationConfig& cfg) {
        auto t = Clock::now();
        out.f1[name].push_back(federate(prepared, cfg));
        out.slowest_run = std::max(out.slowest_run, prep_time + seconds_since(t));
        std::cerr << "  seed " << seed << " " << name << ": macro-F1 " << fmt(out.f1[name].back()) << "\n";
      };
      timed("cpr10", p.federation);
      FederationConfig cfg = p.federation;
      cfg.clients_per_round = 5;
      timed("cpr5", cfg);
      cfg.clients_per_round = 20;
      timed("cpr20", cfg);
      cfg = p.federation;
      cfg.train_cap = 20;
      timed("cap20", cfg);
      cfg.train_cap = 200;
      timed("cap200", cfg);

      std::vector<std::size_t> counts;
      for (std::size_t cap : out.caps) {
        cfg.train_cap = cap;
        try {
          counts.push_back(eligible_clients(prepared.clients, cfg).size());
        } catch (const ConfigError&) {
          counts.push_back(0);
        }
      }
      out.eligible.push_back(counts);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

std::string list(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : "/") + fmt(x);
  return s;
}

Outcome signal_recovery(const EndToEnd& e) {
  if (!e.error.empty()) return {false, "pipeline failed: " + e.error};
  const auto& f1 = e.f1.at("cpr10");
  const bool every = std::all_of(f1.begin(), f1.end(), [](double x) { return x >= 0.85; });
  return {every && e.slowest_run < 600.0, "macro-F1 per seed " + list(f1) + ", slowest run " +
                                              fmt(e.slowest_run, 1) + " s"};
}

Outcome participation(const EndToEnd& e) {
  if (!e.error.empty()) return {false, "pipeline failed: " + e.error};
  const double a = mean_of(e.f1.at("cpr5")), b = mean_of(e.f1.at("cpr20"));
  return {std::abs(a - b) <= 0.05, "mean macro-F1 " + fmt(a) + " (5/round) vs " + fmt(b) + " (20/round), gap " +
                                       fmt(std::abs(a - b))};
}

Outcome train_cap(const EndToEnd& e) {
  if (!e.error.empty()) return {false, "pipeline failed: " + e.error};
  bool monotone = true;
  for (const auto& counts : e.eligible)
    for (std::size_t i = 1; i < counts.size(); ++i) monotone = monotone && counts[i] <= counts[i - 1];
  const double small = mean_of(e.f1.at("cap20")), large = mean_of(e.f1.at("cap200"));
  std::string counts;
  for (std::size_t i = 0; i < e.caps.size(); ++i)
    counts += (i ? ", " : "") + std::to_string(e.caps[i]) + ":" + std::to_string(e.eligible.at(0)[i]);
  return {monotone && large >= small, "eligible clients {" + counts + "}, mean macro-F1 cap 20 " + fmt(small) +
                                          " vs cap 200 " + fmt(large)};
}

// ---------------------------------------------------------------- reproducibility

Outcome reproducibility() {
  SynthConfig s;
  s.n_instances = 5;
  s.conversations_per_instance = 80;
  const auto corpora = group_records(generate(s).toots).corpora;
  PipelineConfig p;
  p.features.walk.walks_per_node = 1;
  p.features.walk.walk_length = 8;
  p.features.walk.epochs = 1;
  p.federation.rounds = 5;
  p.federation.clients_per_round = 3;
  p.federation.hidden = 16;
  p.federation.train.learning_rate = 1e-3;
  const GridSpec spec{GridAxis::ToxicityThreshold, {"0.5", "0.6"}, 2};

  auto render = [&](std::size_t threads) {
    PipelineConfig q = p;
    q.federation.threads = threads;
    const auto report = run_experiment_grid(corpora, spec, q);
    std::ostringstream os;
    write_grid_cells_csv(os, report);
    write_grid_csv(os, report);
    os << grid_json(report) << grid_markdown(report);
    return std::pair{os.str(), report.cells.size()};
  };
  const auto first = render(1);
  const auto second = render(1);
  const auto threaded = render(3);
  const bool same = first.first == second.first && first.first == threaded.first;
  return {same, std::to_string(first.second) + " cells re-run, reports " + (same ? "byte-identical" : "differ") +
                    " (" + std::to_string(first.first.size()) + " bytes)"};
}

// ---------------------------------------------------------------- llm harness

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Serves the generate endpoint from an in-process transport.
class MockEndpoint {
 public:
  explicit MockEndpoint(CompletionTransport& backend) {
    server_.Post("/api/generate", [&backend](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json reply{{"model", body.at("model")},
                           {"response", backend.generate(body.at("prompt").get<std::string>())},
                           {"done", true}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

Outcome llm_harness() {
  SynthConfig s;
  s.n_instances = 12;
  s.conversations_per_instance = 150;
  const auto corpora = group_records(generate(s).toots).corpora;
  std::vector<LabeledInstance> instances;
  std::map<std::string, Label> truth;
  for (const auto& corpus : corpora) {
    const auto filtered = filter_corpus(corpus, default_languages(), 1);
    instances.push_back(labeled_instance(filtered, label_corpus(filtered, ModerationPolicy{})));
    for (const auto& c : instances.back().conversations) truth[c.text] = c.label;
  }
  LlmEvalConfig cfg;
  cfg.seeds = {1, 42, 999};
  cfg.max_in_flight = 4;

  bool ok = true;
  std::string detail;
  {
    OracleTransport oracle(truth);
    MockEndpoint endpoint(oracle);
    EndpointConfig ec;
    ec.base_url = endpoint.url();
    auto http = make_http_transport(ec);
    const auto report = run_llm_evaluation(instances, cfg, *http);
    for (const auto& sm : report.summary) {
      ok = ok && sm.macro_f1.mean == 1.0 && sm.macro_f1.std == 0.0 && sm.refusals == 0;
      detail += std::string(to_string(sm.setup)) + " " + fmt(sm.macro_f1.mean) + ", ";
    }
  }
  {
    OracleTransport lazy(truth, {}, Label::NonToxic);
    MockEndpoint endpoint(lazy);
    EndpointConfig ec;
    ec.base_url = endpoint.url();
    auto http = make_http_transport(ec);
    const auto report = run_llm_evaluation(instances, cfg, *http);
    double worst = 0.0;
    for (const auto& sm : report.summary) worst = std::max(worst, std::abs(sm.macro_f1.mean - 1.0 / 3.0));
    ok = ok && worst <= 1e-15;
    detail += "always-NonToxic off 1/3 by " + std::to_string(worst) + ", ";
  }

  FewShotSet fs;
  for (int i = 1; i <= 10; ++i) {
    fs.toxic.push_back("toxic example " + std::to_string(i) + ": you are all idiots");
    fs.nontoxic.push_back("calm example " + std::to_string(i) + ": thanks for sharing");
  }
  const std::string golden = read_file(std::string(FEDTOX_GOLDEN_DIR) + "/prompt_rendered.txt");
  const bool prompt_ok = !golden.empty() && build_prompt(fs, "alice: <b>not</b> rendered\nbob: plain reply") == golden;
  ok = ok && prompt_ok;
  detail += std::string("prompt ") + (prompt_ok ? "matches golden" : "differs from golden") + ", ";

  // Refuse every 7th global test text and one local test text per instance.
  const auto split = prepare_llm_split(instances, cfg, 1);
  std::set<std::string> refuse;
  for (std::size_t i = 0; i < split.global_test.size(); i += 7) refuse.insert(split.global_test[i].text);
  for (std::size_t k = 0; k < split.local.size(); ++k)
    refuse.insert(split.instances[k].conversations[split.local[k].test_indices.front()].text);
  const std::size_t global_refused = (split.global_test.size() + 6) / 7;
  const std::size_t local_refused = split.local.size();
  OracleTransport refusing(truth, refuse);
  const auto g = run_global_setup(split, refusing, 4);
  const auto l = run_local_setup(split, refusing, false, 4);
  const auto lg = run_local_setup(split, refusing, true, 4);
  const bool refusals_ok = g.refusals == global_refused && l.refusals == local_refused &&
                           lg.refusals == global_refused * split.instances.size();
  ok = ok && refusals_ok;
  detail += "refusals " + std::to_string(g.refusals) + "/" + std::to_string(global_refused) + " global, " +
            std::to_string(l.refusals) + "/" + std::to_string(local_refused) + " local";
  return {ok, detail};
}

}  // namespace

int main() {
  set_log_sink([](LogLevel, const std::string&) {});
  int failures = 0;
  auto report = [&](int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    if (limit_seconds > 0 && elapsed >= limit_seconds) {
      o.pass = false;
      o.detail += ", over the " + fmt(limit_seconds, 0) + " s limit";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " (" << fmt(elapsed, 2)
              << " s)" << std::endl;
  };

  report(1, "labeling oracle equivalence", 10.0, labeling_equivalence);
  report(2, "conversation graph correctness", 5.0, graph_correctness);
  report(3, "noise-corrected backbone oracle", 30.0, nc_oracle_agreement);
  report(4, "backbone prunes edges more than nodes", 0.0, backbone_shape);
  report(5, "feature vector contract", 0.0, feature_contract);
  report(6, "gradient correctness", 60.0, gradient_correctness);
  report(7, "FedAvg degeneracy", 0.0, fedavg_degeneracy);

  std::cerr << "end-to-end runs (20 instances, 3 seeds):\n";
  const auto e2e_start = Clock::now();
  const EndToEnd e2e = run_end_to_end();
  std::cout << "     end-to-end runs took " << fmt(seconds_since(e2e_start), 1) << " s in total" << std::endl;
  report(8, "end-to-end signal recovery", 0.0, [&] { return signal_recovery(e2e); });
  report(9, "partial participation robustness", 0.0, [&] { return participation(e2e); });
  report(10, "train cap behaviour", 0.0, [&] { return train_cap(e2e); });

  report(11, "grid cell reproducibility", 0.0, reproducibility);
  report(12, "LLM harness with mock endpoint", 0.0, llm_harness);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
