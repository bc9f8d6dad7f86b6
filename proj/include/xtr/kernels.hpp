#pragma once

// Inner-product kernels. Every kernel has a serial reference version and an
// OpenMP version; the two must agree bit-for-bit for any thread count, which
// the unit tests check. Scores are float inputs accumulated in double in a
// fixed order, so the same pair of vectors always yields the same score no
// matter which kernel produced it.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xtr/matrix.hpp"

namespace xtr::kernels {

double dot(std::span<const float> a, std::span<const float> b) noexcept;

struct ScoredToken {
  double score;
  std::uint64_t token;

  friend bool operator==(const ScoredToken&, const ScoredToken&) = default;
};

// Total order used by every top-k in the project: higher score first, lower
// token index first on ties.
inline bool ranks_before(const ScoredToken& a, const ScoredToken& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.token < b.token);
}

using TopK = std::vector<std::vector<ScoredToken>>;

// Top-k corpus rows for each query row. Reference: scores everything, sorts.
TopK topk_serial(const TokenView& queries, const TokenView& corpus, std::size_t k);
// Same result, parallel over (query row, corpus block) with a merge per row.
TopK topk_parallel(const TokenView& queries, const TokenView& corpus, std::size_t k);

// Top-k of a single query vector over an explicit token subset.
std::vector<ScoredToken> topk_subset(std::span<const float> query, const TokenView& corpus,
                                     std::span<const std::uint64_t> tokens, std::size_t k);

DenseMatrix<double> affinity_serial(const TokenView& queries, const TokenView& docs);
DenseMatrix<double> affinity_parallel(const TokenView& queries, const TokenView& docs);

// Corpus rows scanned per block in topk_parallel.
inline constexpr std::size_t kTopKBlockRows = 4096;

}  // namespace xtr::kernels
