#pragma once

// MRR@k, nDCG@k and Recall@k over ranked runs and graded qrels.
//
// Queries are taken from the run. A run query that is absent from the qrels
// or has no positive judgment is skipped and counted in `skipped`.
// nDCG uses gain 2^rel - 1 and discount 1 / log2(rank + 1).

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "xtr/inference_pipeline.hpp"

namespace xtr {

// query_id -> doc_id -> relevance grade (>= 0).
using Qrels = std::map<std::string, std::map<std::string, int>>;
// query_id -> doc_ids in rank order.
using Run = std::map<std::string, std::vector<std::string>>;

// `qid 0 doc_id rel`, whitespace separated.
Qrels read_qrels(std::istream& in);
Qrels load_qrels(const std::filesystem::path& path);
void write_qrels(std::ostream& out, const Qrels& qrels);

// TREC run lines `qid Q0 doc_id rank score tag`; docs ordered by rank.
Run read_trec_run(std::istream& in);
Run load_trec_run(const std::filesystem::path& path);
Run to_run(const RankedRun& ranked);

struct MetricValue {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

MetricValue mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k);
MetricValue ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k);
MetricValue recall_at_k(const Run& run, const Qrels& qrels, std::size_t k);

}  // namespace xtr
