// xtr: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 selftest failure.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xtr/analysis_probes.hpp"
#include "xtr/cost_model.hpp"
#include "xtr/eval_metrics.hpp"
#include "xtr/inference_pipeline.hpp"
#include "xtr/synthetic.hpp"
#include "xtr/token_index.hpp"
#include "xtr/training_objective.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace xtr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSelftest = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File names inside a data directory.
struct DataDir {
  fs::path root;
  fs::path corpus_emb() const { return root / "corpus.emb"; }
  fs::path corpus_manifest() const { return root / "corpus.jsonl"; }
  fs::path query_emb() const { return root / "queries.emb"; }
  fs::path query_manifest() const { return root / "queries.jsonl"; }
  fs::path qrels() const { return root / "qrels.txt"; }
  fs::path partitions() const { return root / "partitions.json"; }
};

std::string default_data_dir() {
  const char* env = std::getenv("XTR_DATA_DIR");
  return env && *env ? env : "data";
}

std::shared_ptr<const Corpus> load_corpus(const DataDir& dir) {
  return std::make_shared<const Corpus>(
      build_corpus(dir.corpus_manifest(), load_embeddings(dir.corpus_emb())));
}

ImputationRule parse_imputation(const std::string& text) {
  if (text == "none") return ImputationRule::none();
  if (text == "topk") return ImputationRule::topk_score();
  if (text == "zero") return ImputationRule::constant(0.0);
  const auto colon = text.find(':');
  if (colon != std::string::npos && text.substr(0, colon) == "const") {
    try {
      std::size_t used = 0;
      const std::string value = text.substr(colon + 1);
      const double c = std::stod(value, &used);
      if (used == value.size() && std::isfinite(c)) return ImputationRule::constant(c);
    } catch (const std::exception&) {
    }
  }
  throw UsageError("--imputation must be none, zero, topk or const:<value>, got '" + text + "'");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------

struct BuildIndexArgs {
  std::string data;
  bool synthetic = false;
  synthetic::CollectionShape shape;
  std::size_t partitions = 0;
};

int build_index(const BuildIndexArgs& a, std::uint64_t seed) {
  const DataDir dir{a.data};
  if (a.synthetic) {
    fs::create_directories(dir.root);
    const auto col = synthetic::labeled_collection(seed, a.shape);
    save_corpus(dir.corpus_emb(), dir.corpus_manifest(), col.corpus);
    save_queries(dir.query_emb(), dir.query_manifest(), col.queries);
    std::ofstream qrels(dir.qrels());
    write_qrels(qrels, col.qrels);
  }
  const auto corpus = load_corpus(dir);
  const auto stats = corpus->layout.stats();
  json out;
  out["data"] = dir.root.string();
  out["documents"] = stats.num_docs;
  out["tokens"] = stats.total_tokens;
  out["mean_doc_tokens"] = stats.mean_doc_tokens;
  out["dim"] = corpus->embeddings.dim();
  out["normalized"] = corpus->embeddings.normalized();
  if (a.partitions > 0) {
    const auto parts = PartitionedTokenIndex::build_partitions(*corpus, a.partitions, seed);
    PartitionedTokenIndex::save_sidecar(dir.partitions(), parts);
    out["partitions"] = a.partitions;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SearchArgs {
  std::string data;
  std::string mode = "xtr";
  std::size_t k_prime = 100;
  std::size_t top_docs = 1000;
  std::string imputation = "topk";
  bool imputation_given = false;
  std::size_t nprobe = 0;
  std::string out;
  std::string stats;
  std::string tag;
};

int search(const SearchArgs& a) {
  const DataDir dir{a.data};
  PipelineConfig config;
  config.k_prime = a.k_prime;
  config.top_docs = a.top_docs;
  if (a.mode == "colbert") {
    config.mode = PipelineMode::kColbert;
    if (a.imputation_given) {
      std::cerr << "warning: --imputation is ignored in colbert mode\n";
    }
  } else {
    config.mode = PipelineMode::kXtr;
    config.imputation = parse_imputation(a.imputation);
  }

  const auto corpus = load_corpus(dir);
  const auto queries = load_queries(dir.query_emb(), dir.query_manifest());
  std::unique_ptr<TokenRetriever> retriever;
  const DocumentStore* store = nullptr;
  if (a.nprobe > 0) {
    auto index = std::make_unique<PartitionedTokenIndex>(
        corpus, PartitionedTokenIndex::load_sidecar(dir.partitions()), a.nprobe);
    store = index.get();
    retriever = std::move(index);
  } else {
    auto index = std::make_unique<ExactTokenIndex>(corpus);
    store = index.get();
    retriever = std::move(index);
  }

  const RankedRun run = config.mode == PipelineMode::kXtr
                            ? run_xtr(config, *retriever, queries)
                            : run_colbert(config, *retriever, *store, queries);
  std::ostringstream trec;
  write_trec_run(trec, run, a.tag.empty() ? a.mode : a.tag);
  write_text(a.out, trec.str());

  if (!a.stats.empty()) {
    json s = json::array();
    for (const auto& q : run.queries) {
      s.push_back({{"query_id", q.query_id},
                   {"candidates", q.stats.candidates},
                   {"mean_hits_per_candidate", q.stats.mean_hits_per_candidate},
                   {"tokens_gathered", q.stats.tokens_gathered},
                   {"bytes_gathered", q.stats.bytes_gathered},
                   {"retrieval_inner_products", q.stats.retrieval_inner_products},
                   {"scoring_inner_products", q.stats.scoring_inner_products},
                   {"scoring_flops", q.stats.scoring_flops}});
    }
    write_text(a.stats, s.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string data;
  std::string qrels;
  std::string run;
  std::size_t k = 10;
};

int evaluate(const EvaluateArgs& a) {
  const DataDir dir{a.data};
  const auto qrels = load_qrels(a.qrels.empty() ? dir.qrels() : fs::path(a.qrels));
  const auto run = load_trec_run(a.run);
  const auto mrr = mrr_at_k(run, qrels, a.k);
  const auto ndcg = ndcg_at_k(run, qrels, a.k);
  const auto recall = recall_at_k(run, qrels, a.k);
  const std::string k = std::to_string(a.k);
  json out;
  out["mrr@" + k] = mrr.value;
  out["ndcg@" + k] = ndcg.value;
  out["recall@" + k] = recall.value;
  out["evaluated"] = mrr.evaluated;
  out["skipped"] = mrr.skipped;
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cost_model(const CostModelParams& p) {
  const auto colbert = flops_colbert_scoring(p);
  const auto xtr = flops_xtr_scoring(p);
  char ratio[64] = "null";
  if (xtr > 0) std::snprintf(ratio, sizeof(ratio), "%.6f", double(colbert) / double(xtr));
  std::printf("{\"colbert\": %llu, \"xtr\": %llu, \"ratio\": %s, \"values_gathered\": %llu, "
              "\"bytes_gathered\": %llu}\n",
              static_cast<unsigned long long>(colbert), static_cast<unsigned long long>(xtr),
              ratio, static_cast<unsigned long long>(values_gathered(p)),
              static_cast<unsigned long long>(bytes_gathered(p)));
  return 0;
}

// ---------------------------------------------------------------------------

struct GradCheckArgs {
  std::size_t batches = 100;
  std::size_t docs = 4;
  std::size_t query_tokens = 4;
  std::size_t doc_tokens = 8;
  std::size_t dim = 16;
  std::size_t k_train = 4;
  double h = 1e-5;
};

json report_json(const GradReport& r) {
  return {{"max_rel_error", r.max_rel_error()},
          {"median_rel_error", r.median_rel_error()},
          {"entries", r.entries.size()},
          {"non_differentiable", r.non_differentiable.size()}};
}

int grad_check(const GradCheckArgs& a, std::uint64_t seed) {
  if (a.docs == 0 || a.query_tokens == 0 || a.doc_tokens == 0 || a.dim == 0 || a.k_train == 0) {
    throw UsageError("grad-check sizes must be >= 1");
  }
  synthetic::Rng rng(seed);
  GradReport som, xtr;
  for (std::size_t t = 0; t < a.batches; ++t) {
    const auto q = synthetic::random_tokens(rng, a.query_tokens, a.dim, true);
    BatchAffinity p;
    for (std::size_t b = 0; b < a.docs; ++b) {
      p.push_back(affinity(q, synthetic::random_tokens(rng, a.doc_tokens, a.dim, true)));
    }
    const std::size_t pos = t % a.docs;
    const auto aligned = align_inbatch_topk(p, a.k_train);
    const auto rs = finite_diff_check([&](const BatchAffinity& x) { return loss_som(x, pos); }, p,
                                      grad_som(p, pos), a.h, row_argmax_structure);
    const auto rx = finite_diff_check(
        [&](const BatchAffinity& x) { return loss_xtr(x, aligned, pos); }, p,
        grad_xtr(p, aligned, pos), a.h,
        [&](const BatchAffinity& x) { return aligned_argmax_structure(x, aligned); });
    som.entries.insert(som.entries.end(), rs.entries.begin(), rs.entries.end());
    som.non_differentiable.insert(som.non_differentiable.end(), rs.non_differentiable.begin(),
                                  rs.non_differentiable.end());
    xtr.entries.insert(xtr.entries.end(), rx.entries.begin(), rx.entries.end());
    xtr.non_differentiable.insert(xtr.non_differentiable.end(), rx.non_differentiable.begin(),
                                  rx.non_differentiable.end());
  }
  json out;
  out["batches"] = a.batches;
  out["h"] = a.h;
  out["sum_of_max"] = report_json(som);
  out["in_batch"] = report_json(xtr);
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
  std::string data;
  std::string kind = "gold";
  std::size_t k_prime = 100;
  std::size_t first_rank = 1;
  std::size_t last_rank = 0;  // 0 = k'
  std::size_t bins = 50;
  std::string out;
};

int probe(const ProbeArgs& a) {
  const DataDir dir{a.data};
  const auto corpus = load_corpus(dir);
  const auto queries = load_queries(dir.query_emb(), dir.query_manifest());
  ExactTokenIndex index(corpus);
  std::vector<RetrievalResult> results(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    results[q] = index.retrieve(queries[q].tokens, a.k_prime);
  }
  const RankRange ranks{a.first_rank, a.last_rank == 0 ? a.k_prime : a.last_rank};
  std::ostringstream csv;
  if (a.kind == "gold") {
    write_probe_csv(csv, gold_token_prob(results, queries, corpus->layout, load_qrels(dir.qrels()),
                                         ranks));
  } else if (a.kind == "lexical") {
    write_probe_csv(csv, lexical_match_prob(results, queries, corpus->layout, ranks));
  } else {
    write_histogram_csv(csv, score_histogram(results, a.bins, corpus->embeddings.normalized()));
  }
  write_text(a.out, csv.str());
  return 0;
}

// ---------------------------------------------------------------------------

bool report(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
  return ok;
}

int selftest(std::uint64_t seed) {
  bool ok = true;
  {
    const auto fc = synthetic::failure_case();
    auto corpus = std::make_shared<const Corpus>(fc.corpus);
    const double score = score_colbert(fc.query.tokens, corpus->document(fc.positive));
    ok &= report(std::abs(score - 0.8) <= 1e-9, "failure case: sum-of-max score of D+ is 0.8");
    const auto batch = fc.batch();
    const auto p = batch.affinities();
    const double som = loss_som(p, batch.positive);
    ok &= report(som < 0.05, "failure case: sum-of-max loss below 0.05");
    ExactTokenIndex index(corpus);
    const auto hits = index.retrieve(fc.query.tokens, 1);
    bool none = true;
    for (const auto& row : hits.rows)
      for (const auto& h : row) none = none && h.doc != fc.positive;
    ok &= report(none, "failure case: top-1 retrieval returns no D+ token");
    const double xtr = loss_xtr(p, align_inbatch_topk(p, 1), batch.positive);
    ok &= report(xtr >= std::log(double(p.size())) - 0.05,
                 "failure case: in-batch loss at least ln B - 0.05");
  }
  {
    bool same = true;
    double worst = 0.0;
    for (std::uint64_t c = 0; c < 5; ++c) {
      synthetic::Rng rng(seed * 1000 + c);
      auto corpus =
          std::make_shared<const Corpus>(synthetic::random_corpus(rng, {40, 1, 12, 16, true}));
      ExactTokenIndex index(corpus);
      const QuerySet qs = {synthetic::random_query(rng, "q", 6, 16, true)};
      PipelineConfig xc;
      xc.k_prime = corpus->embeddings.rows();
      PipelineConfig cc = xc;
      cc.mode = PipelineMode::kColbert;
      const auto a = run_xtr(xc, index, qs).queries[0].docs;
      const auto b = run_colbert(cc, index, index, qs).queries[0].docs;
      same = same && a.size() == b.size();
      for (std::size_t r = 0; same && r < a.size(); ++r) {
        same = a[r].doc_id == b[r].doc_id;
        worst = std::max(worst, std::abs(a[r].score - b[r].score));
      }
    }
    ok &= report(same && worst <= 1e-6, "k' = M imputed scoring reduces to sum-of-max");
  }
  return ok ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-vector late-interaction retrieval: token retrieval, scoring, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file overriding defaults");

  std::uint64_t seed = 0;
  int workers = 0;
  app.add_option("--seed", seed, "Seed for every randomized fixture");
  app.add_option("--workers", workers, "OpenMP threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  const std::string data_default = default_data_dir();

  BuildIndexArgs bi;
  bi.data = data_default;
  auto* cmd_build = app.add_subcommand("build-index", "Validate a corpus; optionally generate a synthetic one");
  cmd_build->add_option("--data", bi.data, "Data directory (default $XTR_DATA_DIR or ./data)");
  cmd_build->add_flag("--synthetic", bi.synthetic, "Write a seeded synthetic collection first");
  cmd_build->add_option("--docs", bi.shape.docs)->check(CLI::PositiveNumber);
  cmd_build->add_option("--dim", bi.shape.dim)->check(CLI::PositiveNumber);
  cmd_build->add_option("--vocab", bi.shape.vocab)->check(CLI::PositiveNumber);
  cmd_build->add_option("--queries", bi.shape.queries)->check(CLI::PositiveNumber);
  cmd_build->add_option("--query-tokens", bi.shape.query_tokens)->check(CLI::PositiveNumber);
  cmd_build->add_option("--partitions", bi.partitions, "Also build a partition sidecar");

  SearchArgs sa;
  sa.data = data_default;
  auto* cmd_search = app.add_subcommand("search", "Rank documents for every query");
  cmd_search->add_option("--data", sa.data, "Data directory");
  cmd_search->add_option("--mode", sa.mode)->check(CLI::IsMember({"xtr", "colbert"}));
  cmd_search->add_option("--k-prime", sa.k_prime, "Tokens retrieved per query token")
      ->check(CLI::PositiveNumber);
  cmd_search->add_option("--top-docs", sa.top_docs)->check(CLI::PositiveNumber);
  auto* imputation_opt = cmd_search->add_option("--imputation", sa.imputation,
                                                "none | zero | topk | const:<value>");
  cmd_search->add_option("--nprobe", sa.nprobe, "Use the partition sidecar, probing N partitions");
  cmd_search->add_option("--out", sa.out, "TREC run file (default stdout)");
  cmd_search->add_option("--stats", sa.stats, "Per-query instrumentation JSON");
  cmd_search->add_option("--tag", sa.tag, "Run tag (default: mode)");

  EvaluateArgs ea;
  ea.data = data_default;
  auto* cmd_eval = app.add_subcommand("evaluate", "MRR, nDCG and recall of a TREC run");
  cmd_eval->add_option("--data", ea.data, "Data directory holding qrels.txt");
  cmd_eval->add_option("--qrels", ea.qrels, "Qrels file (default <data>/qrels.txt)");
  cmd_eval->add_option("--run", ea.run, "TREC run file")->required();
  cmd_eval->add_option("--k", ea.k, "Cutoff")->check(CLI::PositiveNumber);

  CostModelParams cp;
  auto* cmd_cost = app.add_subcommand("cost-model", "Closed-form scoring FLOPs");
  cmd_cost->add_option("--n", cp.n, "Query tokens")->required();
  cmd_cost->add_option("--d", cp.d, "Embedding dimension")->required();
  cmd_cost->add_option("--k-prime", cp.k_prime)->required();
  cmd_cost->add_option("--m-bar", cp.m_bar, "Mean document length")->required();
  cmd_cost->add_option("--r-bar", cp.r_bar, "Mean retrieved tokens per candidate")->required();

  GradCheckArgs ga;
  auto* cmd_grad = app.add_subcommand("grad-check", "Analytic vs finite-difference gradients");
  cmd_grad->add_option("--batches", ga.batches);
  cmd_grad->add_option("--docs", ga.docs, "Documents per batch");
  cmd_grad->add_option("--query-tokens", ga.query_tokens);
  cmd_grad->add_option("--doc-tokens", ga.doc_tokens);
  cmd_grad->add_option("--dim", ga.dim);
  cmd_grad->add_option("--k-train", ga.k_train);
  cmd_grad->add_option("--step", ga.h, "Central-difference step h");

  ProbeArgs pa;
  pa.data = data_default;
  auto* cmd_probe = app.add_subcommand("probe", "Token-retrieval probes as CSV");
  cmd_probe->add_option("--data", pa.data, "Data directory");
  cmd_probe->add_option("--kind", pa.kind)->check(CLI::IsMember({"gold", "lexical", "histogram"}));
  cmd_probe->add_option("--k-prime", pa.k_prime)->check(CLI::PositiveNumber);
  cmd_probe->add_option("--first-rank", pa.first_rank);
  cmd_probe->add_option("--last-rank", pa.last_rank, "Default: k'");
  cmd_probe->add_option("--bins", pa.bins);
  cmd_probe->add_option("--out", pa.out, "CSV file (default stdout)");

  auto* cmd_selftest = app.add_subcommand("selftest", "Failure-case fixture and reduction check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (workers > 0) omp_set_num_threads(workers);
  sa.imputation_given = imputation_opt->count() > 0;

  try {
    if (*cmd_build) return build_index(bi, seed);
    if (*cmd_search) return search(sa);
    if (*cmd_eval) return evaluate(ea);
    if (*cmd_cost) return cost_model(cp);
    if (*cmd_grad) return grad_check(ga, seed);
    if (*cmd_probe) return probe(pa);
    if (*cmd_selftest) return selftest(seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
