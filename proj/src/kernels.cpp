#include "xtr/kernels.hpp"

#include <algorithm>
#include <cassert>

namespace xtr::kernels {

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

namespace {

void keep_best(std::vector<ScoredToken>& v, std::size_t k) {
  if (v.size() > k) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(),
                      ranks_before);
    v.resize(k);
  } else {
    std::sort(v.begin(), v.end(), ranks_before);
  }
}

// Bounded min-heap on ranks_before: the root is the current worst survivor.
void scan_block(std::span<const float> q, const TokenView& corpus, std::size_t first,
                std::size_t last, std::size_t k, std::vector<ScoredToken>& heap) {
  heap.clear();
  for (std::size_t t = first; t < last; ++t) {
    const ScoredToken cand{dot(q, corpus.row(t)), t};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    } else if (ranks_before(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), ranks_before);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    }
  }
}

}  // namespace

TopK topk_serial(const TokenView& queries, const TokenView& corpus, std::size_t k) {
  TopK out(queries.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) {
    std::vector<ScoredToken> all(corpus.rows);
    for (std::size_t t = 0; t < corpus.rows; ++t) {
      all[t] = {dot(queries.row(i), corpus.row(t)), t};
    }
    std::sort(all.begin(), all.end(), ranks_before);
    all.resize(std::min(k, all.size()));
    out[i] = std::move(all);
  }
  return out;
}

TopK topk_parallel(const TokenView& queries, const TokenView& corpus, std::size_t k) {
  const std::size_t n = queries.rows;
  const std::size_t blocks = (corpus.rows + kTopKBlockRows - 1) / kTopKBlockRows;
  std::vector<std::vector<ScoredToken>> partial(n * blocks);

  const auto tasks = static_cast<std::int64_t>(n * blocks);
#pragma omp parallel
  {
    std::vector<ScoredToken> heap;
    heap.reserve(k);
#pragma omp for schedule(dynamic)
    for (std::int64_t task = 0; task < tasks; ++task) {
      const auto i = static_cast<std::size_t>(task) / blocks;
      const auto b = static_cast<std::size_t>(task) % blocks;
      const std::size_t first = b * kTopKBlockRows;
      const std::size_t last = std::min(corpus.rows, first + kTopKBlockRows);
      scan_block(queries.row(i), corpus, first, last, k, heap);
      partial[static_cast<std::size_t>(task)] = heap;
    }
  }

  TopK out(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<ScoredToken> merged;
    merged.reserve(k * blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      const auto& p = partial[i * blocks + b];
      merged.insert(merged.end(), p.begin(), p.end());
    }
    keep_best(merged, k);
    out[i] = std::move(merged);
  }
  return out;
}

std::vector<ScoredToken> topk_subset(std::span<const float> query, const TokenView& corpus,
                                     std::span<const std::uint64_t> tokens, std::size_t k) {
  std::vector<ScoredToken> scored;
  scored.reserve(tokens.size());
  for (auto t : tokens) scored.push_back({dot(query, corpus.row(t)), t});
  keep_best(scored, k);
  return scored;
}

DenseMatrix<double> affinity_serial(const TokenView& queries, const TokenView& docs) {
  DenseMatrix<double> p(queries.rows, docs.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) {
    for (std::size_t j = 0; j < docs.rows; ++j) p(i, j) = dot(queries.row(i), docs.row(j));
  }
  return p;
}

DenseMatrix<double> affinity_parallel(const TokenView& queries, const TokenView& docs) {
  DenseMatrix<double> p(queries.rows, docs.rows);
  const auto cells = static_cast<std::int64_t>(queries.rows * docs.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < cells; ++c) {
    const auto i = static_cast<std::size_t>(c) / docs.rows;
    const auto j = static_cast<std::size_t>(c) % docs.rows;
    p(i, j) = dot(queries.row(i), docs.row(j));
  }
  return p;
}

}  // namespace xtr::kernels
