#include <benchmark/benchmark.h>

#include "fedtox/convgraph.hpp"
#include "fedtox/deepwalk.hpp"
#include "fedtox/graphsage.hpp"
#include "fedtox/rng.hpp"
#include "fedtox/synth.hpp"
#include "gradcheck.hpp"

using namespace fedtox;

namespace {

InstanceCorpus synthetic_instance(std::size_t conversations) {
  SynthConfig s;
  s.n_instances = 1;
  s.conversations_per_instance = conversations;
  s.instance_size_spread = 0.0;
  return group_records(generate(s).toots).corpora.at(0);
}

void BM_BuildGraph(benchmark::State& state) {
  const auto corpus = synthetic_instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(corpus));
}
BENCHMARK(BM_BuildGraph)->RangeMultiplier(4)->Range(100, 1600);

void BM_NcScores(benchmark::State& state) {
  const auto graph = build_graph(synthetic_instance(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(nc_scores(graph));
  state.counters["edges"] = static_cast<double>(graph.edge_count());
}
BENCHMARK(BM_NcScores)->RangeMultiplier(4)->Range(100, 1600);

void BM_DeepWalk(benchmark::State& state) {
  const auto corpus = synthetic_instance(static_cast<std::size_t>(state.range(0)));
  WalkConfig w;
  w.walks_per_node = 2;
  w.walk_length = 10;
  w.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(deepwalk_embed(corpus, w, 1));
}
BENCHMARK(BM_DeepWalk)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  auto f = testing::random_grad_fixture(3, nodes, 401, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(f.graph, f.features, f.labels, f.mask, f.model));
}
BENCHMARK(BM_ForwardBackward)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  auto f = testing::random_grad_fixture(3, nodes, 401, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(f.graph, f.features, f.model));
}
BENCHMARK(BM_Forward)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
