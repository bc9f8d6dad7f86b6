#include "xtr/analysis_probes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace xtr {

namespace {

constexpr double kCosineSlack = 1e-3;

void check_inputs(std::span<const RetrievalResult> results, const QuerySet& queries,
                  RankRange ranks) {
  if (results.size() != queries.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one retrieval result per query required");
  }
  if (ranks.first == 0 || ranks.last < ranks.first) {
    throw Error(ErrorCode::kInvalidArgument, "rank range must satisfy 1 <= first <= last");
  }
}

// Tallies, per rank, the hits satisfying `event` over all query tokens.
template <typename Event>
std::vector<RankProbability> tally(std::span<const RetrievalResult> results, RankRange ranks,
                                   Event&& event) {
  const std::size_t width = ranks.last - ranks.first + 1;
  std::vector<std::uint64_t> hits(width, 0), totals(width, 0);
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (std::size_t i = 0; i < results[q].rows.size(); ++i) {
      const auto& row = results[q].rows[i];
      for (std::size_t r = ranks.first; r <= std::min(ranks.last, row.size()); ++r) {
        ++totals[r - ranks.first];
        if (event(q, i, row[r - 1])) ++hits[r - ranks.first];
      }
    }
  }
  std::vector<RankProbability> out;
  for (std::size_t w = 0; w < width; ++w) {
    if (totals[w] == 0) {
      throw Error(ErrorCode::kMissingData,
                  "no retrieved tokens at rank " + std::to_string(ranks.first + w), ranks.first + w);
    }
    out.push_back({ranks.first + w, static_cast<double>(hits[w]) / totals[w], totals[w]});
  }
  return out;
}

}  // namespace

std::string case_fold(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<RankProbability> gold_token_prob(std::span<const RetrievalResult> results,
                                             const QuerySet& queries,
                                             const CorpusLayout& layout, const Qrels& qrels,
                                             RankRange ranks) {
  check_inputs(results, queries, ranks);
  std::vector<const std::map<std::string, int>*> judged(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto it = qrels.find(queries[q].query_id);
    if (it == qrels.end()) {
      throw Error(ErrorCode::kMissingData, "no qrels for query " + queries[q].query_id, q);
    }
    judged[q] = &it->second;
  }
  return tally(results, ranks, [&](std::size_t q, std::size_t, const TokenHit& hit) {
    auto it = judged[q]->find(layout.record(hit.doc).doc_id);
    return it != judged[q]->end() && it->second > 0;
  });
}

std::vector<RankProbability> lexical_match_prob(std::span<const RetrievalResult> results,
                                                const QuerySet& queries,
                                                const CorpusLayout& layout, RankRange ranks) {
  check_inputs(results, queries, ranks);
  std::vector<std::vector<std::string>> folded(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (!queries[q].token_texts) {
      throw Error(ErrorCode::kMissingData, "query " + queries[q].query_id + " has no token texts", q);
    }
    for (const auto& t : *queries[q].token_texts) folded[q].push_back(case_fold(t));
  }
  return tally(results, ranks, [&](std::size_t q, std::size_t i, const TokenHit& hit) {
    const std::string* text = layout.token_text(hit.token_idx);
    if (!text) {
      throw Error(ErrorCode::kMissingData,
                  "document " + layout.record(hit.doc).doc_id + " has no token texts", hit.doc);
    }
    return case_fold(*text) == folded[q].at(i);
  });
}

Histogram score_histogram(std::span<const RetrievalResult> results, std::size_t bins,
                          bool normalized) {
  if (!normalized) {
    throw Error(ErrorCode::kNotNormalized,
                "score histogram needs cosine scores from a normalized store");
  }
  if (bins == 0) throw Error(ErrorCode::kInvalidArgument, "histogram needs >= 1 bin");
  Histogram h;
  const double width = 2.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(-1.0 + width * static_cast<double>(b));
  h.edges.back() = 1.0;
  h.counts.assign(bins, 0);

  std::uint64_t total = 0;
  for (const auto& r : results) {
    for (const auto& row : r.rows) {
      for (const auto& hit : row) {
        if (std::abs(hit.score) > 1.0 + kCosineSlack) {
          throw Error(ErrorCode::kNotNormalized,
                      "score " + std::to_string(hit.score) + " outside cosine range",
                      hit.token_idx);
        }
        const double s = std::clamp(hit.score, -1.0, 1.0);
        auto b = static_cast<std::size_t>(std::floor((s + 1.0) / width));
        ++h.counts[std::min(b, bins - 1)];
        ++total;
      }
    }
  }
  if (total == 0) throw Error(ErrorCode::kMissingData, "no scores to histogram");
  for (auto c : h.counts) {
    h.density.push_back(static_cast<double>(c) / (static_cast<double>(total) * width));
  }
  return h;
}

void write_probe_csv(std::ostream& out, const std::vector<RankProbability>& probe) {
  out << "rank,probability,count\n";
  char buf[64];
  for (const auto& p : probe) {
    std::snprintf(buf, sizeof(buf), "%.9f", p.probability);
    out << p.rank << ',' << buf << ',' << p.count << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram) {
  out << "bin_left,bin_right,density\n";
  char buf[128];
  for (std::size_t b = 0; b < histogram.density.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.9f", histogram.edges[b], histogram.edges[b + 1],
                  histogram.density[b]);
    out << buf << '\n';
  }
}

}  // namespace xtr
