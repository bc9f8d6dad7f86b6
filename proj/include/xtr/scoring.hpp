#pragma once

// Late-interaction scoring functions.
//
//   score_colbert     mean over query tokens of the row-max inner product
//   score_xtr_train   same, but only over alignments produced by in-batch
//                     top-k_train retrieval, normalized by the number Z of
//                     query tokens that retrieved anything from the document
//   score_xtr_infer   scores a candidate from retrieval hits alone; query
//                     tokens that retrieved nothing from it take an imputed
//                     similarity m_i instead

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xtr/matrix.hpp"
#include "xtr/token_index.hpp"

namespace xtr {

using AffinityMatrix = DenseMatrix<double>;

enum class AlignmentMode { kRowMax, kInBatchTopK, kRetrieved };

struct AlignmentMatrix {
  DenseMatrix<std::uint8_t> mask;
  AlignmentMode mode = AlignmentMode::kRowMax;

  bool aligned(std::size_t i, std::size_t j) const { return mask(i, j) != 0; }
  // Number of rows with at least one alignment (Z).
  std::size_t aligned_rows() const;
};

AffinityMatrix affinity(const TokenView& query, const TokenView& doc);

// One alignment per row at the row maximum; ties go to the lowest column.
AlignmentMatrix align_row_max(const AffinityMatrix& p);

// For every query token, rank all tokens of all batch documents together
// (ties by position in the concatenated batch) and align the top k_train.
std::vector<AlignmentMatrix> align_inbatch_topk(std::span<const AffinityMatrix> batch,
                                                std::size_t k_train);

// A_ij = 1 iff token j of `doc` appears in row i of the retrieval result.
AlignmentMatrix align_retrieved(const RetrievalResult& hits, DocIndex doc,
                                std::size_t doc_tokens);

double score_colbert(const AffinityMatrix& p);
double score_colbert(const TokenView& query, const TokenView& doc);

// Rows without any alignment contribute 0; Z is clipped to 1.
double score_xtr_train(const AffinityMatrix& p, const AlignmentMatrix& a);

class ImputationRule {
 public:
  enum class Kind { kNone, kConstant, kTopKScore };

  static ImputationRule none() { return ImputationRule(Kind::kNone, 0.0); }
  static ImputationRule constant(double value);
  static ImputationRule topk_score() { return ImputationRule(Kind::kTopKScore, 0.0); }

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  std::string name() const;

  friend bool operator==(const ImputationRule&, const ImputationRule&) = default;

 private:
  ImputationRule(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

// m_i for query token `row`. nullopt means "no imputation" (rule none).
std::optional<double> impute(const RetrievalResult& hits, std::size_t row,
                             const ImputationRule& rule);

// Imputed score of one candidate; reads only the retrieval result.
double score_xtr_infer(const RetrievalResult& hits, DocIndex doc, const ImputationRule& rule);

struct DocScore {
  DocIndex doc;
  double score;
};

// Scores every candidate of `hits` in one pass over the hit lists. The
// per-candidate result equals score_xtr_infer. Sorted by doc index.
std::vector<DocScore> score_xtr_candidates(const RetrievalResult& hits,
                                           const ImputationRule& rule);

}  // namespace xtr
