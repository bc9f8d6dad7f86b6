#include "xtr/token_index.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "xtr/kernels.hpp"

namespace xtr {

namespace {

void check_query(const TokenMatrix& query, std::size_t dim, std::size_t k_prime,
                 std::size_t total_tokens) {
  if (query.dim() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " != index dim " +
                    std::to_string(dim));
  }
  if (k_prime == 0 || k_prime > total_tokens) {
    throw Error(ErrorCode::kInvalidArgument,
                "k' must be in [1, M]; got " + std::to_string(k_prime) +
                    " with M = " + std::to_string(total_tokens));
  }
}

std::vector<TokenHit> to_hits(const std::vector<kernels::ScoredToken>& scored,
                              const CorpusLayout& layout) {
  std::vector<TokenHit> hits;
  hits.reserve(scored.size());
  for (const auto& s : scored) {
    hits.push_back({s.token, layout.doc_of(s.token),
                    static_cast<std::uint32_t>(layout.position_of(s.token)), s.score});
  }
  return hits;
}

}  // namespace

ExactTokenIndex::ExactTokenIndex(std::shared_ptr<const Corpus> corpus, KernelPolicy policy)
    : corpus_(std::move(corpus)), policy_(policy) {
  if (!corpus_) throw Error(ErrorCode::kInvalidArgument, "null corpus");
}

RetrievalResult ExactTokenIndex::retrieve(const TokenMatrix& query, std::size_t k_prime) const {
  const auto& emb = corpus_->embeddings;
  check_query(query, emb.dim(), k_prime, emb.rows());
  const auto top = policy_ == KernelPolicy::kSerial
                       ? kernels::topk_serial(query, emb, k_prime)
                       : kernels::topk_parallel(query, emb, k_prime);
  RetrievalResult result;
  result.k_prime = k_prime;
  result.inner_products = static_cast<std::uint64_t>(query.rows()) * emb.rows();
  result.rows.reserve(top.size());
  for (const auto& row : top) result.rows.push_back(to_hits(row, corpus_->layout));
  return result;
}

PartitionedTokenIndex::Partitions PartitionedTokenIndex::build_partitions(
    const Corpus& corpus, std::size_t num_partitions, std::uint64_t seed,
    std::size_t iterations) {
  const auto& emb = corpus.embeddings;
  if (num_partitions == 0 || num_partitions > emb.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "num_partitions must be in [1, M]");
  }
  const std::size_t dim = emb.dim();

  std::vector<std::uint64_t> order(emb.rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Partitions parts;
  for (std::size_t p = 0; p < num_partitions; ++p) {
    auto r = emb.row(order[p]);
    parts.centroids.emplace_back(r.begin(), r.end());
  }
  parts.assignment.assign(emb.rows(), 0);

  auto assign = [&] {
    for (std::size_t t = 0; t < emb.rows(); ++t) {
      std::uint32_t best = 0;
      double best_score = kernels::dot(emb.row(t), parts.centroids[0]);
      for (std::size_t p = 1; p < num_partitions; ++p) {
        const double s = kernels::dot(emb.row(t), parts.centroids[p]);
        if (s > best_score) {
          best_score = s;
          best = static_cast<std::uint32_t>(p);
        }
      }
      parts.assignment[t] = best;
    }
  };

  assign();
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<std::vector<double>> sums(num_partitions, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(num_partitions, 0);
    for (std::size_t t = 0; t < emb.rows(); ++t) {
      const auto p = parts.assignment[t];
      ++counts[p];
      auto r = emb.row(t);
      for (std::size_t c = 0; c < dim; ++c) sums[p][c] += r[c];
    }
    for (std::size_t p = 0; p < num_partitions; ++p) {
      if (counts[p] == 0) continue;
      for (std::size_t c = 0; c < dim; ++c) {
        parts.centroids[p][c] = static_cast<float>(sums[p][c] / counts[p]);
      }
    }
    assign();
  }
  return parts;
}

PartitionedTokenIndex::PartitionedTokenIndex(std::shared_ptr<const Corpus> corpus,
                                             Partitions partitions, std::size_t nprobe)
    : corpus_(std::move(corpus)), partitions_(std::move(partitions)), nprobe_(nprobe) {
  if (!corpus_) throw Error(ErrorCode::kInvalidArgument, "null corpus");
  const auto& emb = corpus_->embeddings;
  if (partitions_.centroids.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "partitioned index needs >= 1 partition");
  }
  if (partitions_.assignment.size() != emb.rows()) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "partition assignment covers " + std::to_string(partitions_.assignment.size()) +
                    " tokens, corpus has " + std::to_string(emb.rows()));
  }
  for (const auto& c : partitions_.centroids) {
    if (c.size() != emb.dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "centroid dim differs from corpus dim");
    }
  }
  if (nprobe_ == 0) throw Error(ErrorCode::kInvalidArgument, "nprobe must be >= 1");
  lists_.resize(partitions_.centroids.size());
  for (std::size_t t = 0; t < partitions_.assignment.size(); ++t) {
    const auto p = partitions_.assignment[t];
    if (p >= lists_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "partition id out of range", t);
    }
    lists_[p].push_back(t);
  }
}

RetrievalResult PartitionedTokenIndex::retrieve(const TokenMatrix& query,
                                                std::size_t k_prime) const {
  const auto& emb = corpus_->embeddings;
  check_query(query, emb.dim(), k_prime, emb.rows());
  const std::size_t parts = lists_.size();

  RetrievalResult result;
  result.k_prime = k_prime;
  result.rows.resize(query.rows());
  std::vector<std::uint64_t> scanned(query.rows(), 0);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(query.rows()); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto q = query.row(i);
    std::vector<kernels::ScoredToken> ranked(parts);
    for (std::size_t p = 0; p < parts; ++p) {
      ranked[p] = {kernels::dot(q, partitions_.centroids[p]), p};
    }
    std::sort(ranked.begin(), ranked.end(), kernels::ranks_before);

    std::vector<std::uint64_t> tokens;
    for (std::size_t r = 0; r < parts && (r < nprobe_ || tokens.size() < k_prime); ++r) {
      const auto& list = lists_[ranked[r].token];
      tokens.insert(tokens.end(), list.begin(), list.end());
    }
    scanned[i] = parts + tokens.size();
    result.rows[i] = to_hits(kernels::topk_subset(q, emb, tokens, k_prime), corpus_->layout);
  }
  result.inner_products = std::accumulate(scanned.begin(), scanned.end(), std::uint64_t{0});
  return result;
}

PartitionedTokenIndex::Partitions PartitionedTokenIndex::load_sidecar(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    Partitions parts;
    parts.centroids = j.at("centroids").get<std::vector<std::vector<float>>>();
    parts.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
    if (j.at("num_partitions").get<std::size_t>() != parts.centroids.size()) {
      throw Error(ErrorCode::kManifest, "sidecar num_partitions disagrees with centroids");
    }
    return parts;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifest, "bad partition sidecar " + path.string() + ": " + e.what());
  }
}

void PartitionedTokenIndex::save_sidecar(const std::filesystem::path& path,
                                         const Partitions& partitions) {
  nlohmann::ordered_json j;
  j["dim"] = partitions.centroids.empty() ? 0 : partitions.centroids.front().size();
  j["num_partitions"] = partitions.centroids.size();
  j["centroids"] = partitions.centroids;
  j["assignment"] = partitions.assignment;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump() << '\n';
}

CandidateSet candidate_docs(const RetrievalResult& result) {
  CandidateSet set;
  for (const auto& row : result.rows) {
    for (const auto& hit : row) set.docs.push_back(hit.doc);
    set.total_hits += row.size();
  }
  std::sort(set.docs.begin(), set.docs.end());
  set.docs.erase(std::unique(set.docs.begin(), set.docs.end()), set.docs.end());
  set.mean_hits_per_doc =
      set.docs.empty() ? 0.0 : static_cast<double>(set.total_hits) / set.docs.size();
  return set;
}

}  // namespace xtr
