#include <doctest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "xtr/synthetic.hpp"
#include "xtr/token_index.hpp"

using namespace xtr;

namespace {

std::shared_ptr<const Corpus> three_token_corpus() {
  return std::make_shared<const Corpus>(build_corpus(
      {{"a", 1, {}}, {"b", 2, {}}}, TokenMatrix(3, 2, {1, 0, 0, 1, 0.5f, 0.5f})));
}

}  // namespace

TEST_CASE("retrieve_tokens on a hand-checked corpus") {
  ExactTokenIndex index(three_token_corpus());
  const auto r = index.retrieve(TokenMatrix(1, 2, {1, 0}), 2);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.rows[0].size() == 2);
  CHECK(r.rows[0][0].token_idx == 0);
  CHECK(r.rows[0][0].score == 1.0);
  CHECK(r.rows[0][0].doc == 0);
  CHECK(r.rows[0][1].token_idx == 2);
  CHECK(r.rows[0][1].score == 0.5);
  CHECK(r.rows[0][1].doc == 1);
  CHECK(r.rows[0][1].position == 1);
  CHECK(r.inner_products == 3);
}

TEST_CASE("k' = M returns every token, a permutation of the affinity row") {
  ExactTokenIndex index(three_token_corpus());
  const auto r = index.retrieve(TokenMatrix(1, 2, {0.3f, 0.7f}), 3);
  std::multiset<double> got, want;
  for (const auto& h : r.rows[0]) got.insert(h.score);
  for (std::size_t t = 0; t < 3; ++t) {
    want.insert(oracle::dot(std::vector<float>{0.3f, 0.7f}, index.corpus().embeddings.row(t)));
  }
  CHECK(got == want);
}

TEST_CASE("retrieve_tokens errors") {
  ExactTokenIndex index(three_token_corpus());
  CHECK_THROWS_AS(index.retrieve(TokenMatrix(1, 2, {1, 0}), 4), Error);
  CHECK_THROWS_AS(index.retrieve(TokenMatrix(1, 2, {1, 0}), 0), Error);
  CHECK_THROWS_AS(index.retrieve(TokenMatrix(1, 3, {1, 0, 0}), 1), Error);
}

TEST_CASE("exact retrieval equals brute force on random corpora") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    synthetic::Rng rng(seed);
    auto corpus = std::make_shared<const Corpus>(
        synthetic::random_corpus(rng, {60, 1, 30, 1 + seed % 16, seed % 2 == 0}));
    const auto q = synthetic::random_tokens(rng, 3, corpus->embeddings.dim(), false);
    const std::size_t k = 1 + seed * 4 % 64;
    for (auto policy : {KernelPolicy::kSerial, KernelPolicy::kParallel}) {
      ExactTokenIndex index(corpus, policy);
      const auto r = index.retrieve(q, std::min(k, corpus->embeddings.rows()));
      for (std::size_t i = 0; i < q.rows(); ++i) {
        const auto expect = oracle::brute_topk(q.row(i), corpus->embeddings, r.k_prime);
        REQUIRE(r.rows[i].size() == expect.size());
        for (std::size_t j = 0; j < expect.size(); ++j) {
          CHECK(r.rows[i][j].token_idx == expect[j].token);
          CHECK(r.rows[i][j].score == expect[j].score);
          CHECK(r.rows[i][j].doc == corpus->layout.doc_of(expect[j].token));
        }
      }
    }
  }
}

TEST_CASE("candidate_docs bounds and counts") {
  SUBCASE("all hits in distinct docs") {
    auto corpus = std::make_shared<const Corpus>(build_corpus(
        {{"a", 1, {}}, {"b", 1, {}}, {"c", 1, {}}, {"d", 1, {}}, {"e", 1, {}}, {"f", 1, {}}},
        TokenMatrix(6, 1, {6, 5, 4, 3, 2, 1})));
    ExactTokenIndex index(corpus);
    // Two query tokens of opposite sign pick disjoint halves.
    const auto r = index.retrieve(TokenMatrix(2, 1, {1, -1}), 3);
    const auto c = candidate_docs(r);
    CHECK(c.size() == 6);
    CHECK(c.mean_hits_per_doc == 1.0);
  }
  SUBCASE("all hits in one doc") {
    auto corpus = std::make_shared<const Corpus>(
        build_corpus({{"big", 4, {}}, {"small", 1, {}}}, TokenMatrix(5, 1, {5, 4, 3, 2, -9})));
    ExactTokenIndex index(corpus);
    const auto r = index.retrieve(TokenMatrix(2, 1, {1, 2}), 3);
    const auto c = candidate_docs(r);
    CHECK(c.size() == 1);
    CHECK(c.mean_hits_per_doc == 6.0);
  }
}

TEST_CASE("candidate_docs matches a grouping recount; C <= n k'") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    synthetic::Rng rng(100 + seed);
    auto corpus = std::make_shared<const Corpus>(synthetic::random_corpus(rng, {40, 1, 6, 4, true}));
    ExactTokenIndex index(corpus);
    const auto q = synthetic::random_tokens(rng, 1 + seed % 5, 4, true);
    const std::size_t k = 1 + seed % 9;
    const auto r = index.retrieve(q, k);
    const auto c = candidate_docs(r);
    const auto g = oracle::group_hits(r);
    REQUIRE(c.size() == g.hits_per_doc.size());
    std::size_t i = 0;
    for (const auto& [doc, count] : g.hits_per_doc) CHECK(c.docs[i++] == doc);
    CHECK(c.mean_hits_per_doc == doctest::Approx(g.r_bar).epsilon(1e-12));
    CHECK(c.size() <= q.rows() * k);
  }
}

TEST_CASE("candidate set grows monotonically with k'") {
  synthetic::Rng rng(3);
  auto corpus = std::make_shared<const Corpus>(synthetic::random_corpus(rng, {80, 1, 10, 6, true}));
  ExactTokenIndex index(corpus);
  const auto q = synthetic::random_tokens(rng, 4, 6, true);
  std::set<DocIndex> previous;
  for (std::size_t k = 1; k <= 40; ++k) {
    const auto c = candidate_docs(index.retrieve(q, k));
    std::set<DocIndex> now(c.docs.begin(), c.docs.end());
    CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
    previous = std::move(now);
  }
}

TEST_CASE("partitioned index with all partitions probed equals exact search") {
  synthetic::Rng rng(21);
  auto corpus = std::make_shared<const Corpus>(synthetic::random_corpus(rng, {120, 1, 20, 8, true}));
  const auto parts = PartitionedTokenIndex::build_partitions(*corpus, 7, 42);
  PartitionedTokenIndex all(corpus, parts, 7);
  ExactTokenIndex exact(corpus);
  const auto q = synthetic::random_tokens(rng, 5, 8, true);
  for (std::size_t k : {1, 10, 64}) {
    const auto a = all.retrieve(q, k);
    const auto e = exact.retrieve(q, k);
    CHECK(a.rows == e.rows);
  }

  SUBCASE("fewer probes still yield exactly k' hits") {
    PartitionedTokenIndex one(corpus, parts, 1);
    const auto r = one.retrieve(q, 64);
    for (const auto& row : r.rows) CHECK(row.size() == 64);
    CHECK(r.inner_products < q.rows() * (corpus->embeddings.rows() + 7));
  }

  SUBCASE("sidecar round-trip") {
    const auto path = std::filesystem::temp_directory_path() / "xtr_partitions_test.json";
    PartitionedTokenIndex::save_sidecar(path, parts);
    const auto loaded = PartitionedTokenIndex::load_sidecar(path);
    CHECK(loaded.assignment == parts.assignment);
    CHECK(loaded.centroids == parts.centroids);
    PartitionedTokenIndex reloaded(corpus, loaded, 7);
    CHECK(reloaded.retrieve(q, 10).rows == exact.retrieve(q, 10).rows);
    std::filesystem::remove(path);
  }
}
