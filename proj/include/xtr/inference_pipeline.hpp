#pragma once

// End-to-end ranking.
//
//   colbert: retrieve -> gather every token of each candidate -> sum-of-max
//   xtr:     retrieve -> score candidates from the retrieval hits only
//
// run_xtr takes only a TokenRetriever, which has no way to hand out document
// embeddings; gathering is impossible in that mode by construction.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "xtr/corpus_store.hpp"
#include "xtr/scoring.hpp"
#include "xtr/token_index.hpp"

namespace xtr {

enum class PipelineMode { kColbert, kXtr };

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kXtr;
  std::size_t k_prime = 100;
  std::size_t top_docs = 1000;
  ImputationRule imputation = ImputationRule::topk_score();
  bool instrumentation = true;
};

// Exact operation counts for one query.
struct Instrumentation {
  std::uint64_t candidates = 0;             // C
  double mean_hits_per_candidate = 0.0;     // r_bar
  std::uint64_t tokens_gathered = 0;
  std::uint64_t bytes_gathered = 0;         // tokens_gathered * d * 4
  std::uint64_t retrieval_inner_products = 0;
  std::uint64_t scoring_inner_products = 0;
  // Scoring-stage FLOPs counted with the cost model's conventions:
  // colbert 2*n*m*d + n*m + n per candidate, xtr n*r + n per candidate.
  std::uint64_t scoring_flops = 0;
};

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;
};

struct QueryRanking {
  std::string query_id;
  std::vector<RankedDoc> docs;
  Instrumentation stats;
};

struct RankedRun {
  std::vector<QueryRanking> queries;
};

RankedRun run_colbert(const PipelineConfig& config, const TokenRetriever& retriever,
                      const DocumentStore& store, const QuerySet& queries);
RankedRun run_xtr(const PipelineConfig& config, const TokenRetriever& retriever,
                  const QuerySet& queries);

// `qid Q0 doc_id rank score tag`, score with 6 decimals.
void write_trec_run(std::ostream& out, const RankedRun& run, std::string_view tag);

}  // namespace xtr
