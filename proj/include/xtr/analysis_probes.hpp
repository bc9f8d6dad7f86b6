#pragma once

// Token-retrieval diagnostics, written as CSV for external plotting.
//
//   gold_token_prob     P(hit at rank k comes from a relevant document)
//   lexical_match_prob  P(hit at rank k has the same surface string as its
//                       query token), case-folded exact match
//   score_histogram     density histogram of retrieval scores over [-1, 1]

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xtr/corpus_store.hpp"
#include "xtr/eval_metrics.hpp"
#include "xtr/token_index.hpp"

namespace xtr {

// Inclusive 1-based rank window.
struct RankRange {
  std::size_t first = 1;
  std::size_t last = 1;
};

struct RankProbability {
  std::size_t rank = 0;
  double probability = 0.0;
  std::uint64_t count = 0;  // retrieved tokens at this rank (denominator)
};

// results[q] belongs to queries[q].
std::vector<RankProbability> gold_token_prob(std::span<const RetrievalResult> results,
                                             const QuerySet& queries,
                                             const CorpusLayout& layout, const Qrels& qrels,
                                             RankRange ranks);

std::vector<RankProbability> lexical_match_prob(std::span<const RetrievalResult> results,
                                                const QuerySet& queries,
                                                const CorpusLayout& layout, RankRange ranks);

struct Histogram {
  std::vector<double> edges;    // bins + 1 values from -1 to 1
  std::vector<double> density;  // count / (total * width)
  std::vector<std::uint64_t> counts;
};

// Requires cosine semantics (`normalized` store). Scores may exceed [-1, 1]
// by at most 1e-3 from float rounding; they are clamped into the edge bins.
Histogram score_histogram(std::span<const RetrievalResult> results, std::size_t bins,
                          bool normalized);

std::string case_fold(std::string_view text);

void write_probe_csv(std::ostream& out, const std::vector<RankProbability>& probe);
void write_histogram_csv(std::ostream& out, const Histogram& histogram);

}  // namespace xtr
