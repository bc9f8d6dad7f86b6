#pragma once

// Brute-force reference computations for the tests. Nothing in here calls
// into the code under test beyond plain data accessors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xtr/corpus_store.hpp"
#include "xtr/token_index.hpp"

namespace oracle {

// Sequential double accumulation over float inputs, matching the index's
// arithmetic so scores can be compared exactly.
inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) acc += double(a[c]) * double(b[c]);
  return acc;
}

struct Scored {
  double score;
  std::uint64_t token;
};

// All M inner products, stable-sorted descending: equal scores keep
// ascending token order.
inline std::vector<Scored> brute_topk(std::span<const float> q, const xtr::TokenMatrix& corpus,
                                      std::size_t k) {
  std::vector<Scored> all;
  for (std::size_t t = 0; t < corpus.rows(); ++t) all.push_back({dot(q, corpus.row(t)), t});
  std::stable_sort(all.begin(), all.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::vector<std::vector<double>> naive_affinity(const xtr::TokenView& q,
                                                       const xtr::TokenView& d) {
  std::vector<std::vector<double>> p(q.rows, std::vector<double>(d.rows, 0.0));
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t j = 0; j < d.rows; ++j)
      for (std::size_t c = 0; c < q.dim; ++c)
        p[i][j] += double(q.data[i * q.dim + c]) * double(d.data[j * d.dim + c]);
  return p;
}

inline double naive_sum_of_max(const std::vector<std::vector<double>>& p) {
  double s = 0.0;
  for (const auto& row : p) s += *std::max_element(row.begin(), row.end());
  return s / double(p.size());
}

// Candidate documents and hit counts by grouping hits into a map.
struct Grouped {
  std::map<xtr::DocIndex, std::size_t> hits_per_doc;
  double r_bar = 0.0;
};

inline Grouped group_hits(const xtr::RetrievalResult& r) {
  Grouped g;
  std::size_t total = 0;
  for (const auto& row : r.rows) {
    for (const auto& h : row) {
      ++g.hits_per_doc[h.doc];
      ++total;
    }
  }
  g.r_bar = g.hits_per_doc.empty() ? 0.0 : double(total) / double(g.hits_per_doc.size());
  return g;
}

inline double log_sum_exp_loss(const std::vector<double>& s, std::size_t pos) {
  long double z = 0.0L;
  for (double v : s) z += std::exp(static_cast<long double>(v));
  return static_cast<double>(-static_cast<long double>(s[pos]) + std::log(z));
}

}  // namespace oracle
