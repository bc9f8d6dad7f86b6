#pragma once

// Token retrieval: top-k' inner-product search over every corpus token, and
// the candidate document set formed from the retrieved tokens.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "xtr/corpus_store.hpp"
#include "xtr/matrix.hpp"

namespace xtr {

struct TokenHit {
  std::uint64_t token_idx = 0;
  DocIndex doc = 0;
  std::uint32_t position = 0;
  double score = 0.0;

  friend bool operator==(const TokenHit&, const TokenHit&) = default;
};

// rows[i] holds exactly k_prime hits for query token i, ordered by
// (score desc, token_idx asc). rows[i].back().score is the k'-th score.
struct RetrievalResult {
  std::size_t k_prime = 0;
  std::vector<std::vector<TokenHit>> rows;
  std::uint64_t inner_products = 0;  // dot products evaluated by the search

  std::size_t num_query_tokens() const noexcept { return rows.size(); }
};

// The search side of an index. Exposes the document table but never the
// document embeddings, so code holding only a TokenRetriever cannot gather.
class TokenRetriever {
 public:
  virtual ~TokenRetriever() = default;
  virtual RetrievalResult retrieve(const TokenMatrix& query, std::size_t k_prime) const = 0;
  virtual const CorpusLayout& layout() const = 0;
  virtual std::size_t dim() const = 0;
};

// The gathering side: full token embeddings of one document.
class DocumentStore {
 public:
  virtual ~DocumentStore() = default;
  virtual TokenView gather(DocIndex doc) const = 0;
};

enum class KernelPolicy { kSerial, kParallel };

// Exact search over all M corpus tokens.
class ExactTokenIndex final : public TokenRetriever, public DocumentStore {
 public:
  explicit ExactTokenIndex(std::shared_ptr<const Corpus> corpus,
                           KernelPolicy policy = KernelPolicy::kParallel);

  RetrievalResult retrieve(const TokenMatrix& query, std::size_t k_prime) const override;
  const CorpusLayout& layout() const override { return corpus_->layout; }
  std::size_t dim() const override { return corpus_->embeddings.dim(); }
  TokenView gather(DocIndex doc) const override { return corpus_->document(doc); }

  const Corpus& corpus() const noexcept { return *corpus_; }

 private:
  std::shared_ptr<const Corpus> corpus_;
  KernelPolicy policy_;
};

// Coarse partitioning of corpus tokens (inner-product k-means); a query
// token scans only the tokens of its `nprobe` best partitions. Probing more
// partitions is forced whenever fewer than k' tokens would be scanned. With
// nprobe == num_partitions the result equals ExactTokenIndex exactly.
class PartitionedTokenIndex final : public TokenRetriever, public DocumentStore {
 public:
  struct Partitions {
    std::vector<std::vector<float>> centroids;
    std::vector<std::uint32_t> assignment;  // per corpus token
  };

  static Partitions build_partitions(const Corpus& corpus, std::size_t num_partitions,
                                     std::uint64_t seed, std::size_t iterations = 5);

  PartitionedTokenIndex(std::shared_ptr<const Corpus> corpus, Partitions partitions,
                        std::size_t nprobe);

  // JSON sidecar: {"dim", "num_partitions", "centroids": [[...]], "assignment": [...]}
  static Partitions load_sidecar(const std::filesystem::path& path);
  static void save_sidecar(const std::filesystem::path& path, const Partitions& partitions);

  RetrievalResult retrieve(const TokenMatrix& query, std::size_t k_prime) const override;
  const CorpusLayout& layout() const override { return corpus_->layout; }
  std::size_t dim() const override { return corpus_->embeddings.dim(); }
  TokenView gather(DocIndex doc) const override { return corpus_->document(doc); }

  std::size_t num_partitions() const noexcept { return lists_.size(); }
  const Partitions& partitions() const noexcept { return partitions_; }

 private:
  std::shared_ptr<const Corpus> corpus_;
  Partitions partitions_;
  std::vector<std::vector<std::uint64_t>> lists_;
  std::size_t nprobe_;
};

struct CandidateSet {
  std::vector<DocIndex> docs;  // ascending, deduplicated
  std::uint64_t total_hits = 0;
  double mean_hits_per_doc = 0.0;  // r_bar

  std::size_t size() const noexcept { return docs.size(); }
};

CandidateSet candidate_docs(const RetrievalResult& result);

}  // namespace xtr
