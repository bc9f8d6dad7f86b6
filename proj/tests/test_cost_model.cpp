#include <doctest.h>

#include "xtr/cost_model.hpp"
#include "xtr/inference_pipeline.hpp"
#include "xtr/synthetic.hpp"

using namespace xtr;

namespace {

CostModelParams table1() {
  CostModelParams p;
  p.n = 16;
  p.d = 128;
  p.k_prime = 100;
  p.m_bar = 55;
  p.r_bar = 2.5;
  p.M = 3'000'000'000ULL;
  return p;
}

}  // namespace

TEST_CASE("reference settings reproduce the published FLOPs") {
  const auto p = table1();
  CHECK(flops_colbert_scoring(p) == 361'881'600ULL);
  CHECK(flops_xtr_scoring(p) == 89'600ULL);
  const double ratio = double(flops_colbert_scoring(p)) / double(flops_xtr_scoring(p));
  CHECK(ratio == doctest::Approx(4038.857142857143).epsilon(1e-12));
  CHECK(ratio > 4000.0);
}

TEST_CASE("trivial settings") {
  CostModelParams p;
  p.n = p.k_prime = p.d = 1;
  p.m_bar = 1;
  CHECK(flops_colbert_scoring(p) == 4);
  p.n = 3;
  p.k_prime = 7;
  p.r_bar = 0.0;
  CHECK(flops_xtr_scoring(p) == 9 * 7);
  p.k_prime = 0;
  CHECK(bytes_gathered(p) == 0);
  CHECK(flops_colbert_scoring(p) == 0);
}

TEST_CASE("gathered volume at k' = 1000") {
  auto p = table1();
  p.k_prime = 1000;
  CHECK(values_gathered(p) == 112'640'000ULL);
  CHECK(bytes_gathered(p) == 450'560'000ULL);
}

TEST_CASE("real-valued r_bar rounds to the nearest integer") {
  CostModelParams p;
  p.n = 3;
  p.k_prime = 1;
  p.r_bar = 1.0 / 3.0;
  CHECK(flops_xtr_scoring(p) == 12);  // 9 * 4/3
  p.r_bar = 0.05;
  CHECK(flops_xtr_scoring(p) == 9);  // 9.45
  p.r_bar = 0.06;
  CHECK(flops_xtr_scoring(p) == 10);  // 9.54
}

TEST_CASE("validation and overflow") {
  auto p = table1();
  p.r_bar = 16.0 * 100.0 + 1.0;
  CHECK_THROWS_AS(flops_xtr_scoring(p), Error);
  p = table1();
  p.m_bar = -1.0;
  CHECK_THROWS_AS(flops_colbert_scoring(p), Error);
  p = table1();
  p.n = 1ULL << 31;
  p.k_prime = 1ULL << 20;
  CHECK_THROWS_AS(flops_colbert_scoring(p), Error);
}

TEST_CASE("both estimates are monotone in every parameter") {
  const auto base = table1();
  auto bump = [](CostModelParams p, int field) {
    switch (field) {
      case 0: p.n += 1; break;
      case 1: p.d += 1; break;
      case 2: p.k_prime += 1; break;
      case 3: p.m_bar += 1; break;
      case 4: p.r_bar += 0.5; break;
    }
    return p;
  };
  for (int f = 0; f < 5; ++f) {
    const auto up = bump(base, f);
    CHECK(flops_colbert_scoring(up) >= flops_colbert_scoring(base));
    CHECK(flops_xtr_scoring(up) >= flops_xtr_scoring(base));
    CHECK(bytes_gathered(up) >= bytes_gathered(base));
  }
  CHECK(flops_xtr_scoring(base) < flops_colbert_scoring(base));
}

TEST_CASE("pipeline instrumentation matches the closed forms when C = n k'") {
  // Every document has exactly m tokens; query token i is aligned with a
  // private block of documents, so the k' hits of distinct query tokens never
  // share a document and each document gets exactly one hit.
  const std::size_t n = 3, k = 4, m = 5, d = 6;
  const std::size_t docs = n * k + 2;
  std::vector<float> data;
  std::vector<ManifestEntry> manifest;
  for (std::size_t doc = 0; doc < docs; ++doc) {
    manifest.push_back({"d" + std::to_string(doc), m, {}});
    for (std::size_t t = 0; t < m; ++t) {
      std::vector<float> v(d, 0.0f);
      if (doc < n * k) {
        // Token 0 of the doc points at its query token with a doc-specific
        // strength; the rest point at the unused last coordinate.
        if (t == 0) {
          v[doc / k] = 1.0f - 0.01f * float(doc % k);
        } else {
          v[d - 1] = 1.0f;
        }
      } else {
        v[d - 1] = 1.0f;
      }
      data.insert(data.end(), v.begin(), v.end());
    }
  }
  auto corpus =
      std::make_shared<const Corpus>(build_corpus(manifest, TokenMatrix(docs * m, d, data)));
  std::vector<float> q(n * d, 0.0f);
  for (std::size_t i = 0; i < n; ++i) q[i * d + i] = 1.0f;
  const QuerySet queries = {Query{"q", TokenMatrix(n, d, q), {}}};
  ExactTokenIndex index(corpus);

  PipelineConfig cc;
  cc.mode = PipelineMode::kColbert;
  cc.k_prime = k;
  const auto colbert = run_colbert(cc, index, index, queries);
  PipelineConfig xc;
  xc.k_prime = k;
  const auto xtr = run_xtr(xc, index, queries);

  CostModelParams p;
  p.n = n;
  p.d = d;
  p.k_prime = k;
  p.m_bar = double(m);
  p.r_bar = xtr.queries[0].stats.mean_hits_per_candidate;
  REQUIRE(colbert.queries[0].stats.candidates == n * k);
  REQUIRE(p.r_bar == 1.0);

  // Closed forms count n k' candidates of n m inner products each; with C =
  // n k' the measured counters reproduce them exactly.
  CHECK(measure(colbert).scoring_flops == flops_colbert_scoring(p));
  CHECK(measure(colbert).bytes_gathered == bytes_gathered(p));
  CHECK(colbert.queries[0].stats.scoring_inner_products == n * k * n * m);
  CHECK(measure(xtr).scoring_flops == flops_xtr_scoring(p));
  CHECK(measure(xtr).bytes_gathered == 0);
}

TEST_CASE("closed forms upper-bound measured cost on random corpora") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    synthetic::Rng rng(seed);
    // Fixed-length documents so m_bar is exact.
    auto corpus = std::make_shared<const Corpus>(synthetic::random_corpus(rng, {60, 6, 6, 8, true}));
    ExactTokenIndex index(corpus);
    const QuerySet queries = {synthetic::random_query(rng, "q", 4, 8, true)};
    PipelineConfig cc;
    cc.mode = PipelineMode::kColbert;
    cc.k_prime = 5;
    const auto run = run_colbert(cc, index, index, queries);
    CostModelParams p;
    p.n = 4;
    p.d = 8;
    p.k_prime = 5;
    p.m_bar = 6;
    CHECK(measure(run).scoring_flops <= flops_colbert_scoring(p));
    CHECK(measure(run).bytes_gathered <= bytes_gathered(p));
  }
}
