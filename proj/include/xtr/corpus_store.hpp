#pragma once

// Token embedding storage: the binary embedding file, JSON-lines manifests,
// and the document/token identifier space of a corpus.
//
// Embedding file layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "XTRE"
//   4       4     u32 version (= 1)
//   8       1     u8  normalized flag (0 or 1)
//   9       4     u32 dim
//   13      8     u64 rows
//   21      ...   rows * dim IEEE-754 binary32 values, row-major
//
// A manifest is JSON-lines, one object per document (or query):
//   {"doc_id": "d1", "token_count": 3, "token_texts": ["a", "b", "c"]}
// Document order defines token offsets into the embedding file.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xtr/error.hpp"
#include "xtr/matrix.hpp"

namespace xtr {

inline constexpr char kEmbeddingMagic[4] = {'X', 'T', 'R', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 21;

TokenMatrix read_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, const TokenMatrix& matrix);

TokenMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const TokenMatrix& matrix);

// One manifest line. `id` is the value of "doc_id" or "query_id".
struct ManifestEntry {
  std::string id;
  std::size_t token_count = 0;
  std::optional<std::vector<std::string>> token_texts;
};

std::vector<ManifestEntry> read_manifest(std::istream& in, std::string_view id_key);
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    std::string_view id_key);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path,
                                         std::string_view id_key);
void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestEntry>& entries, std::string_view id_key);

struct DocumentRecord {
  std::string doc_id;
  std::size_t token_offset = 0;
  std::size_t token_count = 0;
  std::optional<std::vector<std::string>> token_texts;
};

struct CorpusStats {
  std::size_t num_docs = 0;      // L
  std::size_t total_tokens = 0;  // M
  double mean_doc_tokens = 0.0;  // m_bar
};

using DocIndex = std::uint32_t;

// Document table without the embeddings: everything a consumer needs to map
// a global token index back to (document, position) and to a doc_id string.
class CorpusLayout {
 public:
  CorpusLayout() = default;
  explicit CorpusLayout(std::vector<DocumentRecord> records);

  const std::vector<DocumentRecord>& records() const noexcept { return records_; }
  const DocumentRecord& record(DocIndex doc) const { return records_.at(doc); }
  const CorpusStats& stats() const noexcept { return stats_; }
  std::size_t num_docs() const noexcept { return records_.size(); }
  std::size_t total_tokens() const noexcept { return token_doc_.size(); }

  DocIndex doc_of(std::size_t token) const { return token_doc_.at(token); }
  std::size_t position_of(std::size_t token) const {
    return token - records_[doc_of(token)].token_offset;
  }
  std::optional<DocIndex> find(std::string_view doc_id) const;
  // Surface string of a global token, if the manifest provided texts.
  const std::string* token_text(std::size_t token) const;

 private:
  std::vector<DocumentRecord> records_;
  std::vector<DocIndex> token_doc_;
  std::unordered_map<std::string, DocIndex> by_id_;
  CorpusStats stats_;
};

struct Corpus {
  TokenMatrix embeddings;
  CorpusLayout layout;

  TokenView document(DocIndex doc) const {
    const auto& r = layout.record(doc);
    return embeddings.view().slice(r.token_offset, r.token_count);
  }
};

// Validates the manifest against the embeddings (token counts must sum to
// rows, ids unique, no empty document) and assigns contiguous offsets.
Corpus build_corpus(const std::vector<ManifestEntry>& manifest, TokenMatrix embeddings);
Corpus build_corpus(const std::filesystem::path& manifest, TokenMatrix embeddings);

struct Query {
  std::string query_id;
  TokenMatrix tokens;
  std::optional<std::vector<std::string>> token_texts;
};

using QuerySet = std::vector<Query>;

QuerySet build_queries(const std::vector<ManifestEntry>& manifest,
                       const TokenMatrix& embeddings);
QuerySet load_queries(const std::filesystem::path& embeddings,
                      const std::filesystem::path& manifest);
void save_queries(const std::filesystem::path& embeddings,
                  const std::filesystem::path& manifest, const QuerySet& queries);
void save_corpus(const std::filesystem::path& embeddings,
                 const std::filesystem::path& manifest, const Corpus& corpus);

}  // namespace xtr
