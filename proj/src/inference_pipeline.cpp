#include "xtr/inference_pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <ostream>

namespace xtr {

namespace {

void check_config(const PipelineConfig& config, PipelineMode expected) {
  if (config.mode != expected) {
    throw Error(ErrorCode::kInvalidArgument, "pipeline invoked with the wrong mode");
  }
  if (config.k_prime == 0) throw Error(ErrorCode::kInvalidArgument, "k' must be >= 1");
  if (config.top_docs == 0) throw Error(ErrorCode::kInvalidArgument, "top_docs must be >= 1");
}

std::vector<RankedDoc> rank(const std::vector<DocScore>& scored, const CorpusLayout& layout,
                            std::size_t top_docs) {
  std::vector<RankedDoc> docs;
  docs.reserve(scored.size());
  for (const auto& s : scored) docs.push_back({layout.record(s.doc).doc_id, s.score, 0});
  std::sort(docs.begin(), docs.end(), [](const RankedDoc& a, const RankedDoc& b) {
    return a.score > b.score || (a.score == b.score && a.doc_id < b.doc_id);
  });
  if (docs.size() > top_docs) docs.resize(top_docs);
  for (std::size_t r = 0; r < docs.size(); ++r) docs[r].rank = r + 1;
  return docs;
}

template <typename PerQuery>
RankedRun for_each_query(const QuerySet& queries, PerQuery&& per_query) {
  RankedRun run;
  run.queries.resize(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t qq = 0; qq < static_cast<std::int64_t>(queries.size()); ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    try {
      run.queries[q] = per_query(queries[q]);
    } catch (...) {
      errors[q] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return run;
}

}  // namespace

RankedRun run_colbert(const PipelineConfig& config, const TokenRetriever& retriever,
                      const DocumentStore& store, const QuerySet& queries) {
  check_config(config, PipelineMode::kColbert);
  const auto& layout = retriever.layout();
  return for_each_query(queries, [&](const Query& query) {
    const auto hits = retriever.retrieve(query.tokens, config.k_prime);
    const auto candidates = candidate_docs(hits);
    const std::uint64_t n = query.tokens.rows();
    const std::uint64_t d = query.tokens.dim();

    QueryRanking out{query.query_id, {}, {}};
    std::vector<DocScore> scored;
    scored.reserve(candidates.size());
    Instrumentation& st = out.stats;
    for (DocIndex doc : candidates.docs) {
      const TokenView tokens = store.gather(doc);
      scored.push_back({doc, score_colbert(query.tokens, tokens)});
      const std::uint64_t m = tokens.rows;
      st.tokens_gathered += m;
      st.scoring_inner_products += n * m;
      st.scoring_flops += 2 * n * m * d + n * m + n;
    }
    st.bytes_gathered = st.tokens_gathered * d * sizeof(float);
    st.candidates = candidates.size();
    st.mean_hits_per_candidate = candidates.mean_hits_per_doc;
    st.retrieval_inner_products = hits.inner_products;
    if (!config.instrumentation) st = Instrumentation{};
    out.docs = rank(scored, layout, config.top_docs);
    return out;
  });
}

RankedRun run_xtr(const PipelineConfig& config, const TokenRetriever& retriever,
                  const QuerySet& queries) {
  check_config(config, PipelineMode::kXtr);
  const auto& layout = retriever.layout();
  return for_each_query(queries, [&](const Query& query) {
    const auto hits = retriever.retrieve(query.tokens, config.k_prime);
    const auto scored = score_xtr_candidates(hits, config.imputation);

    QueryRanking out{query.query_id, {}, {}};
    Instrumentation& st = out.stats;
    const auto candidates = candidate_docs(hits);
    st.candidates = candidates.size();
    st.mean_hits_per_candidate = candidates.mean_hits_per_doc;
    st.retrieval_inner_products = hits.inner_products;
    const std::uint64_t n = query.tokens.rows();
    st.scoring_flops = n * candidates.total_hits + n * candidates.size();
    if (!config.instrumentation) st = Instrumentation{};
    out.docs = rank(scored, layout, config.top_docs);
    return out;
  });
}

void write_trec_run(std::ostream& out, const RankedRun& run, std::string_view tag) {
  char score[64];
  for (const auto& q : run.queries) {
    for (const auto& d : q.docs) {
      std::snprintf(score, sizeof(score), "%.6f", d.score);
      out << q.query_id << " Q0 " << d.doc_id << ' ' << d.rank << ' ' << score << ' ' << tag
          << '\n';
    }
  }
}

}  // namespace xtr
