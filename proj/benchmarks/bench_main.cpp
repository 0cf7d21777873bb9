#include <benchmark/benchmark.h>

#include <random>

#include "ctxrr/attention.hpp"
#include "ctxrr/context.hpp"
#include "ctxrr/dataset.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/ops.hpp"
#include "ctxrr/scoring.hpp"

namespace {

using namespace ctxrr;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_GcnForwardBatch(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  GcnConfig cfg;
  Rng rng(7);
  const std::size_t f = 128;
  GcnParams params = GcnParams::glorot(cfg, f, rng);
  std::vector<ContextGraph> graphs;
  const Tensor a = star_adjacency(cfg.nodes());
  for (std::size_t i = 0; i < batch; ++i) {
    graphs.push_back({cfg.nodes(), f, random_matrix(cfg.nodes(), f, 10 + i), a, normalize_adjacency(a, cfg.norm)});
  }
  std::vector<const ContextGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  for (auto _ : state) benchmark::DoNotOptimize(gcn_scores(params, ptrs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_GcnForwardBatch)->Arg(1)->Arg(32)->Arg(256);

void BM_GcnTrainStep(benchmark::State& state) {
  GcnConfig cfg;
  Rng rng(7);
  const std::size_t f = 128;
  GcnParams params = GcnParams::glorot(cfg, f, rng);
  std::vector<ContextGraph> graphs;
  const Tensor a = star_adjacency(cfg.nodes());
  for (std::size_t i = 0; i < 32; ++i) {
    graphs.push_back({cfg.nodes(), f, random_matrix(cfg.nodes(), f, 10 + i), a, normalize_adjacency(a, cfg.norm)});
  }
  std::vector<const ContextGraph*> ptrs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    ptrs.push_back(&graphs[i]);
    labels.push_back(static_cast<int>(i % 2));
  }
  for (auto _ : state) {
    Tensor loss = cross_entropy_rows(gcn_logits(params, ptrs), labels);
    loss.backward();
    for (Tensor& t : params.tensors()) t.zero_grad();
  }
}
BENCHMARK(BM_GcnTrainStep);

const Dataset& bench_dataset() {
  static const Dataset ds = [] {
    SynthConfig cfg;
    cfg.num_identities = 60;
    cfg.scenes_per_camera = 20;
    return generate_synthetic(cfg);
  }();
  return ds;
}

void BM_AttentionSimilarity(benchmark::State& state) {
  const Dataset& ds = bench_dataset();
  Rng rng(3);
  const AttentionParams params = AttentionParams::glorot(ds.dim, 256, rng);
  const Instance& a = ds.scenes[0].instances[0];
  const Instance& b = ds.scenes[1].instances[0];
  for (auto _ : state) benchmark::DoNotOptimize(attention_similarity(params, a, b));
}
BENCHMARK(BM_AttentionSimilarity);

void BM_AttentionProjectorSimilarity(benchmark::State& state) {
  const Dataset& ds = bench_dataset();
  Rng rng(3);
  AttentionProjector projector(AttentionParams::glorot(ds.dim, 256, rng));
  projector.cache(ds);
  const Instance& a = ds.scenes[0].instances[0];
  const Instance& b = ds.scenes[1].instances[0];
  for (auto _ : state) benchmark::DoNotOptimize(projector.similarity(a, b));
}
BENCHMARK(BM_AttentionProjectorSimilarity);

void BM_ContextExpansion(benchmark::State& state) {
  const Dataset& ds = bench_dataset();
  const Scene& ps = ds.scenes[0];
  const Scene& gs = ds.scenes[1];
  const PairScorer scorer = [](const Instance& x, const Instance& y) {
    return fused_similarity(x.embedding, y.embedding, uniform_weights());
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(expand(ps, ps.instances[0], gs, gs.instances[0], scorer, 3, 42));
  }
}
BENCHMARK(BM_ContextExpansion);

}  // namespace

BENCHMARK_MAIN();
