#include <doctest.h>

#include <omp.h>

#include "oracles.hpp"
#include "xtr/kernels.hpp"
#include "xtr/synthetic.hpp"

using namespace xtr;

TEST_CASE("dot accumulates float inputs in double") {
  const std::vector<float> a = {1.0f, 2.0f, 3.0f};
  const std::vector<float> b = {0.5f, -1.0f, 0.25f};
  CHECK(kernels::dot(a, b) == 0.5 - 2.0 + 0.75);
}

TEST_CASE("parallel top-k equals the serial reference for every thread count") {
  synthetic::Rng rng(5);
  // Spans several 4096-row blocks, with duplicated rows to force ties.
  auto base = synthetic::random_tokens(rng, 9000, 8, true);
  std::vector<float> data(base.data().begin(), base.data().end());
  for (std::size_t r = 0; r < 300; ++r) {
    std::copy_n(data.begin() + 8 * (r * 7), 8, data.begin() + 8 * (5000 + r));
  }
  const TokenMatrix corpus(9000, 8, data, true);
  const auto queries = synthetic::random_tokens(rng, 5, 8, true);

  const auto reference = kernels::topk_serial(queries, corpus, 50);
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    CHECK(kernels::topk_parallel(queries, corpus, 50) == reference);
  }
  // Also against the oracle.
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto expect = oracle::brute_topk(queries.row(i), corpus, 50);
    REQUIRE(expect.size() == reference[i].size());
    for (std::size_t r = 0; r < expect.size(); ++r) {
      CHECK(expect[r].token == reference[i][r].token);
      CHECK(expect[r].score == reference[i][r].score);
    }
  }
}

TEST_CASE("top-k with k larger than the corpus returns everything") {
  const TokenMatrix corpus(3, 2, {1, 0, 0, 1, 0.5f, 0.5f});
  const TokenMatrix q(1, 2, {1, 0});
  const auto top = kernels::topk_parallel(q, corpus, 10);
  REQUIRE(top[0].size() == 3);
  CHECK(top[0][0].token == 0);
  CHECK(top[0][1].token == 2);
  CHECK(top[0][2].token == 1);
}

TEST_CASE("ties resolve to the lower token index") {
  const TokenMatrix corpus(4, 2, {0, 1, 1, 0, 1, 0, 1, 0});
  const TokenMatrix q(1, 2, {1, 0});
  for (const auto& top : {kernels::topk_serial(q, corpus, 2), kernels::topk_parallel(q, corpus, 2)}) {
    CHECK(top[0][0].token == 1);
    CHECK(top[0][1].token == 2);
  }
}

TEST_CASE("affinity kernels agree and match the triple-loop oracle") {
  synthetic::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = synthetic::random_tokens(rng, 1 + trial % 8, 1 + trial % 4, false);
    const auto d = synthetic::random_tokens(rng, 1 + (trial * 3) % 8, q.dim(), false);
    const auto serial = kernels::affinity_serial(q, d);
    omp_set_num_threads(3);
    CHECK(kernels::affinity_parallel(q, d) == serial);
    const auto naive = oracle::naive_affinity(q, d);
    for (std::size_t i = 0; i < q.rows(); ++i)
      for (std::size_t j = 0; j < d.rows(); ++j) CHECK(std::abs(serial(i, j) - naive[i][j]) < 1e-6);
  }
}
