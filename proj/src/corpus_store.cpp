#include "xtr/corpus_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace xtr {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedHeader: return "malformed_header";
    case ErrorCode::kTruncatedPayload: return "truncated_payload";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kNotNormalized: return "not_normalized";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kManifest: return "manifest";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kEmptyDocument: return "empty_document";
    case ErrorCode::kTokenCountMismatch: return "token_count_mismatch";
    case ErrorCode::kNotCandidate: return "not_candidate";
    case ErrorCode::kMissingData: return "missing_data";
    case ErrorCode::kUndefined: return "undefined";
  }
  return "unknown";
}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
                         bool normalized)
    : rows_(rows), dim_(dim), data_(std::move(data)), normalized_(normalized) {
  if (rows_ == 0 || dim_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "token matrix needs rows >= 1 and dim >= 1");
  }
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "token matrix data length " + std::to_string(data_.size()) +
                    " != rows*dim " + std::to_string(rows_ * dim_));
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    double norm2 = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) {
      const float v = data_[r * dim_ + c];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFinite,
                    "non-finite value in row " + std::to_string(r), r);
      }
      norm2 += static_cast<double>(v) * v;
    }
    if (normalized_ && std::abs(std::sqrt(norm2) - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::kNotNormalized,
                  "row " + std::to_string(r) + " has norm " +
                      std::to_string(std::sqrt(norm2)) + " in a normalized store",
                  r);
    }
  }
}

void normalize_rows(std::vector<float>& data, std::size_t dim) {
  for (std::size_t off = 0; off + dim <= data.size(); off += dim) {
    double norm2 = 0.0;
    for (std::size_t c = 0; c < dim; ++c) norm2 += static_cast<double>(data[off + c]) * data[off + c];
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t c = 0; c < dim; ++c) {
      data[off + c] = static_cast<float>(data[off + c] * inv);
    }
  }
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* bytes) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

TokenMatrix read_embeddings(std::istream& in) {
  std::array<unsigned char, kEmbeddingHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    throw Error(ErrorCode::kMalformedHeader, "embedding header shorter than 21 bytes");
  }
  if (std::memcmp(header.data(), kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedHeader, "bad magic, expected \"XTRE\"");
  }
  const auto version = get_le<std::uint32_t>(header.data() + 4);
  if (version != kEmbeddingVersion) {
    throw Error(ErrorCode::kMalformedHeader,
                "unsupported embedding version " + std::to_string(version));
  }
  const unsigned char flag = header[8];
  if (flag > 1) {
    throw Error(ErrorCode::kMalformedHeader, "normalized flag must be 0 or 1");
  }
  const auto dim = get_le<std::uint32_t>(header.data() + 9);
  const auto rows = get_le<std::uint64_t>(header.data() + 13);
  if (dim == 0 || rows == 0) {
    throw Error(ErrorCode::kMalformedHeader, "rows and dim must be positive");
  }
  if (rows > (std::uint64_t{1} << 40) / dim) {
    throw Error(ErrorCode::kMalformedHeader, "rows*dim too large");
  }
  const std::size_t count = static_cast<std::size_t>(rows) * dim;

  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != payload.size()) {
    throw Error(ErrorCode::kTruncatedPayload,
                "payload has " + std::to_string(got) + " bytes, header declares " +
                    std::to_string(payload.size()),
                got / (4 * static_cast<std::size_t>(dim)));
  }

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload.data() + 4 * i));
  }
  return TokenMatrix(static_cast<std::size_t>(rows), dim, std::move(data), flag == 1);
}

void write_embeddings(std::ostream& out, const TokenMatrix& matrix) {
  out.write(kEmbeddingMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingVersion);
  put_le<std::uint8_t>(out, matrix.normalized() ? 1 : 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
  put_le<std::uint64_t>(out, matrix.rows());
  for (float v : matrix.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

TokenMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_embeddings(in);
}

void save_embeddings(const std::filesystem::path& path, const TokenMatrix& matrix) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_embeddings(out, matrix);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<ManifestEntry> read_manifest(std::istream& in, std::string_view id_key) {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kManifest,
                  "manifest line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    const std::string key(id_key);
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string() ||
        !obj.contains("token_count") || !obj["token_count"].is_number_integer()) {
      throw Error(ErrorCode::kManifest,
                  "manifest line " + std::to_string(lineno) + " needs \"" + key +
                      "\" (string) and \"token_count\" (int)",
                  lineno);
    }
    const auto count = obj["token_count"].get<long long>();
    if (count < 0) {
      throw Error(ErrorCode::kManifest,
                  "manifest line " + std::to_string(lineno) + ": negative token_count", lineno);
    }
    ManifestEntry e{obj[key].get<std::string>(), static_cast<std::size_t>(count), std::nullopt};
    if (obj.contains("token_texts") && !obj["token_texts"].is_null()) {
      auto texts = obj["token_texts"].get<std::vector<std::string>>();
      if (texts.size() != e.token_count) {
        throw Error(ErrorCode::kManifest,
                    "manifest line " + std::to_string(lineno) +
                        ": token_texts length differs from token_count",
                    lineno);
      }
      e.token_texts = std::move(texts);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    std::string_view id_key) {
  for (const auto& e : entries) {
    nlohmann::ordered_json obj;
    obj[std::string(id_key)] = e.id;
    obj["token_count"] = e.token_count;
    if (e.token_texts) obj["token_texts"] = *e.token_texts;
    out << obj.dump() << '\n';
  }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path,
                                         std::string_view id_key) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_manifest(in, id_key);
}

void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestEntry>& entries, std::string_view id_key) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_manifest(out, entries, id_key);
}

CorpusLayout::CorpusLayout(std::vector<DocumentRecord> records) : records_(std::move(records)) {
  std::size_t expected_offset = 0;
  for (std::size_t d = 0; d < records_.size(); ++d) {
    const auto& r = records_[d];
    if (r.token_count == 0) {
      throw Error(ErrorCode::kEmptyDocument, "document " + r.doc_id + " has no tokens", d);
    }
    if (r.token_offset != expected_offset) {
      throw Error(ErrorCode::kManifest, "document " + r.doc_id + " is not contiguous", d);
    }
    if (!by_id_.emplace(r.doc_id, static_cast<DocIndex>(d)).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate doc_id " + r.doc_id, d);
    }
    expected_offset += r.token_count;
  }
  token_doc_.resize(expected_offset);
  for (std::size_t d = 0; d < records_.size(); ++d) {
    const auto& r = records_[d];
    std::fill_n(token_doc_.begin() + static_cast<std::ptrdiff_t>(r.token_offset),
                r.token_count, static_cast<DocIndex>(d));
  }
  stats_.num_docs = records_.size();
  stats_.total_tokens = expected_offset;
  stats_.mean_doc_tokens =
      records_.empty() ? 0.0 : static_cast<double>(expected_offset) / records_.size();
}

std::optional<DocIndex> CorpusLayout::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const std::string* CorpusLayout::token_text(std::size_t token) const {
  const auto& r = records_[doc_of(token)];
  if (!r.token_texts) return nullptr;
  return &(*r.token_texts)[token - r.token_offset];
}

Corpus build_corpus(const std::vector<ManifestEntry>& manifest, TokenMatrix embeddings) {
  if (manifest.empty()) throw Error(ErrorCode::kManifest, "manifest lists no documents");
  std::vector<DocumentRecord> records;
  records.reserve(manifest.size());
  std::size_t offset = 0;
  for (const auto& e : manifest) {
    records.push_back({e.id, offset, e.token_count, e.token_texts});
    offset += e.token_count;
  }
  if (offset != embeddings.rows()) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "manifest token counts sum to " + std::to_string(offset) +
                    " but embeddings have " + std::to_string(embeddings.rows()) + " rows");
  }
  CorpusLayout layout(std::move(records));
  return Corpus{std::move(embeddings), std::move(layout)};
}

Corpus build_corpus(const std::filesystem::path& manifest, TokenMatrix embeddings) {
  return build_corpus(load_manifest(manifest, "doc_id"), std::move(embeddings));
}

QuerySet build_queries(const std::vector<ManifestEntry>& manifest,
                       const TokenMatrix& embeddings) {
  QuerySet queries;
  queries.reserve(manifest.size());
  std::unordered_set<std::string> seen;
  std::size_t offset = 0;
  for (const auto& e : manifest) {
    if (e.token_count == 0) {
      throw Error(ErrorCode::kEmptyDocument, "query " + e.id + " has no tokens");
    }
    if (!seen.insert(e.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate query_id " + e.id);
    }
    if (offset + e.token_count > embeddings.rows()) break;
    auto rows = embeddings.data().subspan(offset * embeddings.dim(),
                                          e.token_count * embeddings.dim());
    queries.push_back({e.id,
                       TokenMatrix(e.token_count, embeddings.dim(),
                                   std::vector<float>(rows.begin(), rows.end()),
                                   embeddings.normalized()),
                       e.token_texts});
    offset += e.token_count;
  }
  const std::size_t total = std::accumulate(
      manifest.begin(), manifest.end(), std::size_t{0},
      [](std::size_t acc, const ManifestEntry& e) { return acc + e.token_count; });
  if (total != embeddings.rows()) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "query manifest token counts sum to " + std::to_string(total) +
                    " but embeddings have " + std::to_string(embeddings.rows()) + " rows");
  }
  return queries;
}

QuerySet load_queries(const std::filesystem::path& embeddings,
                      const std::filesystem::path& manifest) {
  return build_queries(load_manifest(manifest, "query_id"), load_embeddings(embeddings));
}

void save_queries(const std::filesystem::path& embeddings,
                  const std::filesystem::path& manifest, const QuerySet& queries) {
  if (queries.empty()) throw Error(ErrorCode::kInvalidArgument, "no queries to save");
  std::vector<ManifestEntry> entries;
  std::vector<float> data;
  const std::size_t dim = queries.front().tokens.dim();
  bool normalized = true;
  for (const auto& q : queries) {
    if (q.tokens.dim() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "queries disagree on dim");
    }
    normalized = normalized && q.tokens.normalized();
    entries.push_back({q.query_id, q.tokens.rows(), q.token_texts});
    data.insert(data.end(), q.tokens.data().begin(), q.tokens.data().end());
  }
  const std::size_t rows = data.size() / dim;
  save_embeddings(embeddings, TokenMatrix(rows, dim, std::move(data), normalized));
  save_manifest(manifest, entries, "query_id");
}

void save_corpus(const std::filesystem::path& embeddings,
                 const std::filesystem::path& manifest, const Corpus& corpus) {
  save_embeddings(embeddings, corpus.embeddings);
  std::vector<ManifestEntry> entries;
  for (const auto& r : corpus.layout.records()) {
    entries.push_back({r.doc_id, r.token_count, r.token_texts});
  }
  save_manifest(manifest, entries, "doc_id");
}

}  // namespace xtr
