#pragma once

// Seeded synthetic data: random corpora for property tests, a labeled
// collection with lexical structure for end-to-end runs and probes, and the
// hand-built corpus on which sum-of-max training looks solved while top-1
// token retrieval misses the positive document entirely.

#include <cstddef>
#include <cstdint>
#include <random>

#include "xtr/corpus_store.hpp"
#include "xtr/eval_metrics.hpp"
#include "xtr/training_objective.hpp"

namespace xtr::synthetic {

using Rng = std::mt19937_64;

TokenMatrix random_tokens(Rng& rng, std::size_t rows, std::size_t dim, bool normalized);

struct CorpusShape {
  std::size_t docs = 10;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 8;
  std::size_t dim = 8;
  bool normalized = true;
};

Corpus random_corpus(Rng& rng, const CorpusShape& shape);
Query random_query(Rng& rng, std::string id, std::size_t tokens, std::size_t dim,
                   bool normalized);

struct CollectionShape {
  std::size_t docs = 200;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 24;
  std::size_t dim = 16;
  std::size_t vocab = 64;       // concepts, one surface word each
  std::size_t queries = 20;
  std::size_t query_tokens = 6;
  double noise = 0.35;          // token perturbation around its concept
  double on_topic = 0.8;        // chance a query token copies a gold concept
};

struct Collection {
  Corpus corpus;
  QuerySet queries;
  Qrels qrels;
};

// Every token is a noisy copy of one vocabulary concept and carries that
// concept's word as its surface text. Each query is drawn from one gold doc.
Collection labeled_collection(std::uint64_t seed, const CollectionShape& shape);

struct FailureCase {
  Corpus corpus;         // doc 0 is the positive, docs 1..n are negatives
  Query query;
  DocIndex positive = 0;

  MiniBatch batch() const;
};

// d = 4, n = 2. Every row max of the positive is 0.8, so its sum-of-max
// score is 0.8; negative b holds one token scoring 0.9 with query token b
// and -8 with the other, so each query token's top-1 corpus token belongs to
// a negative.
FailureCase failure_case();

}  // namespace xtr::synthetic
