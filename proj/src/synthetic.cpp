#include "xtr/synthetic.hpp"

#include <cmath>
#include <string>

namespace xtr::synthetic {

TokenMatrix random_tokens(Rng& rng, std::size_t rows, std::size_t dim, bool normalized) {
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<float> data(rows * dim);
  for (auto& v : data) v = gauss(rng);
  if (normalized) normalize_rows(data, dim);
  return TokenMatrix(rows, dim, std::move(data), normalized);
}

Corpus random_corpus(Rng& rng, const CorpusShape& shape) {
  std::uniform_int_distribution<std::size_t> len(shape.min_tokens, shape.max_tokens);
  std::vector<ManifestEntry> manifest;
  std::size_t total = 0;
  for (std::size_t d = 0; d < shape.docs; ++d) {
    const std::size_t m = len(rng);
    manifest.push_back({"d" + std::to_string(d), m, std::nullopt});
    total += m;
  }
  return build_corpus(manifest, random_tokens(rng, total, shape.dim, shape.normalized));
}

Query random_query(Rng& rng, std::string id, std::size_t tokens, std::size_t dim,
                   bool normalized) {
  return Query{std::move(id), random_tokens(rng, tokens, dim, normalized), std::nullopt};
}

namespace {

std::vector<float> noisy_copy(Rng& rng, std::span<const float> concept_vec, double noise) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = noise / std::sqrt(static_cast<double>(concept_vec.size()));
  std::vector<float> v(concept_vec.size());
  for (std::size_t c = 0; c < v.size(); ++c) {
    v[c] = static_cast<float>(concept_vec[c] + scale * gauss(rng));
  }
  return v;
}

std::string word(std::size_t concept_id) { return "w" + std::to_string(concept_id); }

}  // namespace

Collection labeled_collection(std::uint64_t seed, const CollectionShape& shape) {
  Rng rng(seed);
  const TokenMatrix concepts = random_tokens(rng, shape.vocab, shape.dim, true);
  std::uniform_int_distribution<std::size_t> pick_concept(0, shape.vocab - 1);
  std::uniform_int_distribution<std::size_t> len(shape.min_tokens, shape.max_tokens);

  std::vector<ManifestEntry> manifest;
  std::vector<std::vector<std::size_t>> doc_concepts;
  std::vector<float> data;
  for (std::size_t d = 0; d < shape.docs; ++d) {
    const std::size_t m = len(rng);
    ManifestEntry e{"doc" + std::to_string(d), m, std::vector<std::string>{}};
    auto& ids = doc_concepts.emplace_back();
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t c = pick_concept(rng);
      ids.push_back(c);
      e.token_texts->push_back(word(c));
      const auto v = noisy_copy(rng, concepts.row(c), shape.noise);
      data.insert(data.end(), v.begin(), v.end());
    }
    manifest.push_back(std::move(e));
  }
  normalize_rows(data, shape.dim);
  const std::size_t rows = data.size() / shape.dim;
  Collection out{build_corpus(manifest, TokenMatrix(rows, shape.dim, std::move(data), true)),
                 {},
                 {}};

  std::uniform_int_distribution<std::size_t> pick_doc(0, shape.docs - 1);
  std::bernoulli_distribution on_topic(shape.on_topic);
  for (std::size_t q = 0; q < shape.queries; ++q) {
    const std::size_t gold = pick_doc(rng);
    const auto& ids = doc_concepts[gold];
    std::uniform_int_distribution<std::size_t> pick_token(0, ids.size() - 1);
    std::vector<float> qdata;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < shape.query_tokens; ++i) {
      const std::size_t c = on_topic(rng) ? ids[pick_token(rng)] : pick_concept(rng);
      texts.push_back(word(c));
      const auto v = noisy_copy(rng, concepts.row(c), shape.noise);
      qdata.insert(qdata.end(), v.begin(), v.end());
    }
    normalize_rows(qdata, shape.dim);
    const std::string qid = "q" + std::to_string(q);
    out.queries.push_back(
        {qid, TokenMatrix(shape.query_tokens, shape.dim, std::move(qdata), true), texts});
    out.qrels[qid][out.corpus.layout.record(static_cast<DocIndex>(gold)).doc_id] = 1;
  }
  return out;
}

MiniBatch FailureCase::batch() const {
  MiniBatch b{query.tokens, {}, positive};
  for (DocIndex d = 0; d < corpus.layout.num_docs(); ++d) {
    const auto view = corpus.document(d);
    b.docs.emplace_back(view.rows, view.dim,
                        std::vector<float>(view.data.begin(), view.data.end()));
  }
  return b;
}

FailureCase failure_case() {
  // A second coordinate scaled by 2^-12 cancels the binary32 rounding of
  // 0.8, so the positive's row maxima equal 0.8 to double precision.
  constexpr float kScale = 1.0f / 4096.0f;
  const float hi = 0.8f;
  const auto lo = static_cast<float>((0.8 - static_cast<double>(hi)) * 4096.0);
  const float pad = 0.6f;
  const float peak = 0.9f;
  const float sink = -8.0f;

  std::vector<float> docs = {
      hi,   0.0f, pad,  lo,    // positive, aligned with query token 0
      0.0f, hi,   pad,  lo,    // positive, aligned with query token 1
      peak, sink, 0.0f, 0.0f,  // negative 1
      sink, peak, 0.0f, 0.0f,  // negative 2
  };
  std::vector<ManifestEntry> manifest = {
      {"pos", 2, std::vector<std::string>{"alpha", "beta"}},
      {"neg1", 1, std::vector<std::string>{"gamma"}},
      {"neg2", 1, std::vector<std::string>{"delta"}},
  };
  std::vector<float> query = {
      1.0f, 0.0f, 0.0f, kScale,
      0.0f, 1.0f, 0.0f, kScale,
  };
  FailureCase fc{build_corpus(manifest, TokenMatrix(4, 4, std::move(docs))),
                 Query{"failure", TokenMatrix(2, 4, std::move(query)),
                       std::vector<std::string>{"alpha", "beta"}},
                 0};
  return fc;
}

}  // namespace xtr::synthetic
