// Serial reference vs OpenMP kernels, and the two scoring stages.

#include <benchmark/benchmark.h>

#include <map>

#include "xtr/inference_pipeline.hpp"
#include "xtr/kernels.hpp"
#include "xtr/synthetic.hpp"

using namespace xtr;

namespace {

struct Fixture {
  TokenMatrix corpus;
  TokenMatrix queries;
};

const Fixture& fixture(std::size_t rows) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(rows);
  if (it == cache.end()) {
    synthetic::Rng rng(1);
    auto corpus = synthetic::random_tokens(rng, rows, 128, true);
    auto queries = synthetic::random_tokens(rng, 16, 128, true);
    it = cache.emplace(rows, Fixture{std::move(corpus), std::move(queries)}).first;
  }
  return it->second;
}

void BM_TopKSerial(benchmark::State& state) {
  const auto& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::topk_serial(f.queries, f.corpus, 100));
  state.SetItemsProcessed(state.iterations() * f.queries.rows() * f.corpus.rows());
}

void BM_TopKParallel(benchmark::State& state) {
  const auto& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::topk_parallel(f.queries, f.corpus, 100));
  state.SetItemsProcessed(state.iterations() * f.queries.rows() * f.corpus.rows());
}

void BM_AffinitySerial(benchmark::State& state) {
  const auto& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::affinity_serial(f.queries, f.corpus));
}

void BM_AffinityParallel(benchmark::State& state) {
  const auto& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::affinity_parallel(f.queries, f.corpus));
}

// End-to-end ranking on a labeled collection: gather + rescore vs hits only.
const synthetic::Collection& collection() {
  static const auto col = [] {
    synthetic::CollectionShape shape;
    shape.docs = 2000;
    shape.dim = 64;
    shape.queries = 16;
    shape.query_tokens = 16;
    return synthetic::labeled_collection(3, shape);
  }();
  return col;
}

void BM_PipelineColbert(benchmark::State& state) {
  auto corpus = std::make_shared<const Corpus>(collection().corpus);
  ExactTokenIndex index(corpus);
  PipelineConfig config;
  config.mode = PipelineMode::kColbert;
  config.k_prime = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(run_colbert(config, index, index, collection().queries));
}

void BM_PipelineXtr(benchmark::State& state) {
  auto corpus = std::make_shared<const Corpus>(collection().corpus);
  ExactTokenIndex index(corpus);
  PipelineConfig config;
  config.k_prime = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(run_xtr(config, index, collection().queries));
}

}  // namespace

BENCHMARK(BM_TopKSerial)->Arg(1 << 14)->Arg(1 << 17)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TopKParallel)->Arg(1 << 14)->Arg(1 << 17)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AffinitySerial)->Arg(1 << 10)->Arg(1 << 13)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AffinityParallel)->Arg(1 << 10)->Arg(1 << 13)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PipelineColbert)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PipelineXtr)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
