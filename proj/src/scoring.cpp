#include "xtr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "xtr/kernels.hpp"

namespace xtr {

std::size_t AlignmentMatrix::aligned_rows() const {
  std::size_t z = 0;
  for (std::size_t i = 0; i < mask.rows(); ++i) {
    const auto r = mask.row(i);
    if (std::any_of(r.begin(), r.end(), [](std::uint8_t v) { return v != 0; })) ++z;
  }
  return z;
}

AffinityMatrix affinity(const TokenView& query, const TokenView& doc) {
  if (query.dim != doc.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "affinity: query dim " + std::to_string(query.dim) + " != doc dim " +
                    std::to_string(doc.dim));
  }
  return kernels::affinity_serial(query, doc);
}

AlignmentMatrix align_row_max(const AffinityMatrix& p) {
  AlignmentMatrix a{DenseMatrix<std::uint8_t>(p.rows(), p.cols()), AlignmentMode::kRowMax};
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto r = p.row(i);
    // max_element returns the first maximum, i.e. the lowest column on ties.
    const auto j = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    a.mask(i, j) = 1;
  }
  return a;
}

std::vector<AlignmentMatrix> align_inbatch_topk(std::span<const AffinityMatrix> batch,
                                                std::size_t k_train) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  if (k_train == 0) throw Error(ErrorCode::kInvalidArgument, "k_train must be >= 1");
  const std::size_t n = batch.front().rows();
  std::vector<std::size_t> offset(batch.size() + 1, 0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].rows() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "batch affinities disagree on query length");
    }
    offset[b + 1] = offset[b] + batch[b].cols();
  }

  std::vector<AlignmentMatrix> out;
  for (const auto& p : batch) {
    out.push_back({DenseMatrix<std::uint8_t>(n, p.cols()), AlignmentMode::kInBatchTopK});
  }

  std::vector<kernels::ScoredToken> pool(offset.back());
  const std::size_t keep = std::min(k_train, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t j = 0; j < batch[b].cols(); ++j) {
        pool[offset[b] + j] = {batch[b](i, j), offset[b] + j};
      }
    }
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep),
                      pool.end(), kernels::ranks_before);
    for (std::size_t r = 0; r < keep; ++r) {
      const auto global = static_cast<std::size_t>(pool[r].token);
      const auto b = static_cast<std::size_t>(
          std::upper_bound(offset.begin(), offset.end(), global) - offset.begin() - 1);
      out[b].mask(i, global - offset[b]) = 1;
    }
  }
  return out;
}

AlignmentMatrix align_retrieved(const RetrievalResult& hits, DocIndex doc,
                                std::size_t doc_tokens) {
  AlignmentMatrix a{DenseMatrix<std::uint8_t>(hits.rows.size(), doc_tokens),
                    AlignmentMode::kRetrieved};
  for (std::size_t i = 0; i < hits.rows.size(); ++i) {
    for (const auto& h : hits.rows[i]) {
      if (h.doc != doc) continue;
      if (h.position >= doc_tokens) {
        throw Error(ErrorCode::kInvalidArgument, "hit position beyond document length", i);
      }
      a.mask(i, h.position) = 1;
    }
  }
  return a;
}

double score_colbert(const AffinityMatrix& p) {
  if (p.rows() == 0 || p.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "sum-of-max needs a non-empty affinity");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto r = p.row(i);
    sum += *std::max_element(r.begin(), r.end());
  }
  return sum / static_cast<double>(p.rows());
}

double score_colbert(const TokenView& query, const TokenView& doc) {
  return score_colbert(affinity(query, doc));
}

double score_xtr_train(const AffinityMatrix& p, const AlignmentMatrix& a) {
  if (a.mask.rows() != p.rows() || a.mask.cols() != p.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "alignment shape differs from affinity shape");
  }
  double sum = 0.0;
  std::size_t z = 0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (a.aligned(i, j)) best = std::max(best, p(i, j));
    }
    if (std::isfinite(best)) {
      sum += best;
      ++z;
    }
  }
  return sum / static_cast<double>(std::max<std::size_t>(z, 1));
}

ImputationRule ImputationRule::constant(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidArgument, "imputation constant must be finite");
  }
  return ImputationRule(Kind::kConstant, value);
}

std::string ImputationRule::name() const {
  switch (kind_) {
    case Kind::kNone: return "none";
    case Kind::kConstant: return "constant(" + std::to_string(value_) + ")";
    case Kind::kTopKScore: return "topk";
  }
  return "?";
}

std::optional<double> impute(const RetrievalResult& hits, std::size_t row,
                             const ImputationRule& rule) {
  switch (rule.kind()) {
    case ImputationRule::Kind::kNone:
      return std::nullopt;
    case ImputationRule::Kind::kConstant:
      return rule.value();
    case ImputationRule::Kind::kTopKScore:
      if (row >= hits.rows.size() || hits.rows[row].empty()) {
        throw Error(ErrorCode::kMissingData, "top-k' imputation needs hits for query token " +
                                                 std::to_string(row), row);
      }
      return hits.rows[row].back().score;
  }
  return std::nullopt;
}

namespace {

double combine_rows(const RetrievalResult& hits, std::span<const double> row_max,
                    std::span<const std::uint8_t> found, std::span<const double> imputed,
                    std::span<const std::uint8_t> has_imputed) {
  double sum = 0.0;
  for (std::size_t i = 0; i < hits.rows.size(); ++i) {
    if (found[i]) {
      sum += row_max[i];
    } else if (has_imputed[i]) {
      sum += imputed[i];
    }
  }
  return sum / static_cast<double>(hits.rows.size());
}

struct Imputed {
  std::vector<double> value;
  std::vector<std::uint8_t> present;
};

Imputed impute_all(const RetrievalResult& hits, const ImputationRule& rule) {
  Imputed m{std::vector<double>(hits.rows.size(), 0.0),
            std::vector<std::uint8_t>(hits.rows.size(), 0)};
  for (std::size_t i = 0; i < hits.rows.size(); ++i) {
    if (auto v = impute(hits, i, rule)) {
      m.value[i] = *v;
      m.present[i] = 1;
    }
  }
  return m;
}

}  // namespace

double score_xtr_infer(const RetrievalResult& hits, DocIndex doc, const ImputationRule& rule) {
  if (hits.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "empty retrieval result");
  const std::size_t n = hits.rows.size();
  std::vector<double> row_max(n, -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> found(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& h : hits.rows[i]) {
      if (h.doc != doc) continue;
      row_max[i] = std::max(row_max[i], h.score);
      found[i] = 1;
    }
  }
  if (std::none_of(found.begin(), found.end(), [](std::uint8_t f) { return f != 0; })) {
    throw Error(ErrorCode::kNotCandidate,
                "document " + std::to_string(doc) + " was not retrieved by any query token");
  }
  const auto m = impute_all(hits, rule);
  return combine_rows(hits, row_max, found, m.value, m.present);
}

std::vector<DocScore> score_xtr_candidates(const RetrievalResult& hits,
                                           const ImputationRule& rule) {
  if (hits.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "empty retrieval result");
  const std::size_t n = hits.rows.size();
  const auto m = impute_all(hits, rule);

  std::unordered_map<DocIndex, std::size_t> slot;
  std::vector<DocIndex> docs;
  std::vector<double> row_max;
  std::vector<std::uint8_t> found;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& h : hits.rows[i]) {
      auto [it, inserted] = slot.try_emplace(h.doc, docs.size());
      if (inserted) {
        docs.push_back(h.doc);
        row_max.resize(row_max.size() + n, -std::numeric_limits<double>::infinity());
        found.resize(found.size() + n, 0);
      }
      const std::size_t cell = it->second * n + i;
      row_max[cell] = std::max(row_max[cell], h.score);
      found[cell] = 1;
    }
  }

  std::vector<DocScore> scores;
  scores.reserve(docs.size());
  for (std::size_t s = 0; s < docs.size(); ++s) {
    const auto rm = std::span<const double>(row_max).subspan(s * n, n);
    const auto fd = std::span<const std::uint8_t>(found).subspan(s * n, n);
    scores.push_back({docs[s], combine_rows(hits, rm, fd, m.value, m.present)});
  }
  std::sort(scores.begin(), scores.end(),
            [](const DocScore& a, const DocScore& b) { return a.doc < b.doc; });
  return scores;
}

}  // namespace xtr
