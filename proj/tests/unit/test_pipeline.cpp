#include <doctest.h>

#include "fedtox/pipeline.hpp"
#include "fedtox/report.hpp"
#include "fedtox/synth.hpp"

using namespace fedtox;

TEST_SUITE("pipeline") {
  TEST_CASE("thread count does not change results") {
    SynthConfig s;
    s.n_instances = 4;
    s.conversations_per_instance = 50;
    s.users_per_instance = 30;
    const auto corpora = group_records(generate(s).toots).corpora;
    PipelineConfig p;
    p.features.walk.walks_per_node = 1;
    p.features.walk.walk_length = 6;
    p.features.walk.epochs = 1;
    p.federation.rounds = 2;
    p.federation.clients_per_round = 3;
    p.federation.hidden = 8;
    auto one = run_pipeline(corpora, p);
    p.federation.threads = 3;
    auto three = run_pipeline(corpora, p);
    CHECK(one.federation.global == three.federation.global);
    CHECK(evaluation_json(one.federation.final_report()) == evaluation_json(three.federation.final_report()));
    REQUIRE(one.prepared.clients.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(one.prepared.clients[i].features == three.prepared.clients[i].features);
  }

  TEST_CASE("reports carry the pipeline fingerprint hash") {
    SynthConfig s;
    s.n_instances = 2;
    s.conversations_per_instance = 40;
    const auto corpora = group_records(generate(s).toots).corpora;
    PipelineConfig p;
    p.features.toggles.deepwalk = false;
    p.federation.rounds = 1;
    p.federation.hidden = 4;
    auto run = run_pipeline(corpora, p);
    CHECK(run.federation.final_report().config_hash == hex_digest(p.fingerprint()));
    PipelineConfig q = p;
    q.policy.thr_root = 0.5;
    CHECK(p.fingerprint() != q.fingerprint());
    q = p;
    q.federation.threads = 4;
    CHECK(p.fingerprint() == q.fingerprint());
  }

  TEST_CASE("without backboning the full graph is used") {
    SynthConfig s;
    s.n_instances = 1;
    s.conversations_per_instance = 60;
    const auto corpora = group_records(generate(s).toots).corpora;
    PipelineConfig p;
    p.features.toggles.deepwalk = false;
    p.backbone = false;
    auto prepared = prepare_client_data(corpora, p, 1);
    REQUIRE(prepared.diagnostics.size() == 1);
    CHECK(prepared.diagnostics[0].edges_after == prepared.diagnostics[0].edges_before);
    p.backbone = true;
    auto pruned = prepare_client_data(corpora, p, 1);
    CHECK(pruned.diagnostics[0].edges_after <= pruned.diagnostics[0].edges_before);
  }
}
