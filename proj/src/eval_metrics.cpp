#include "xtr/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace xtr {

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string qid, iter, doc;
    long long rel = 0;
    if (!(ls >> qid)) continue;
    if (!(ls >> iter >> doc >> rel)) {
      throw Error(ErrorCode::kManifest, "qrels line " + std::to_string(lineno) +
                                            ": expected `qid 0 doc_id rel`", lineno);
    }
    if (rel < 0) {
      throw Error(ErrorCode::kManifest,
                  "qrels line " + std::to_string(lineno) + ": negative relevance", lineno);
    }
    qrels[qid][doc] = static_cast<int>(rel);
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_qrels(in);
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [doc, rel] : docs) out << qid << "\t0\t" << doc << '\t' << rel << '\n';
  }
}

Run read_trec_run(std::istream& in) {
  std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> ranked;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string qid, q0, doc, score, tag;
    std::size_t rank = 0;
    if (!(ls >> qid)) continue;
    if (!(ls >> q0 >> doc >> rank >> score >> tag)) {
      throw Error(ErrorCode::kManifest,
                  "run line " + std::to_string(lineno) + ": expected 6 columns", lineno);
    }
    ranked[qid].emplace_back(rank, doc);
  }
  Run run;
  for (auto& [qid, docs] : ranked) {
    std::stable_sort(docs.begin(), docs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& out = run[qid];
    for (auto& d : docs) out.push_back(std::move(d.second));
  }
  return run;
}

Run load_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_trec_run(in);
}

Run to_run(const RankedRun& ranked) {
  Run run;
  for (const auto& q : ranked.queries) {
    auto& docs = run[q.query_id];
    for (const auto& d : q.docs) docs.push_back(d.doc_id);
  }
  return run;
}

namespace {

// Calls per_query(ranked docs, judgments) for every evaluable query and
// averages its results.
template <typename PerQuery>
MetricValue average(const Run& run, const Qrels& qrels, std::size_t k, PerQuery&& per_query) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "metric cutoff k must be >= 1");
  MetricValue m;
  double sum = 0.0;
  for (const auto& [qid, docs] : run) {
    auto it = qrels.find(qid);
    const bool has_positive =
        it != qrels.end() &&
        std::any_of(it->second.begin(), it->second.end(), [](const auto& e) { return e.second > 0; });
    if (!has_positive) {
      ++m.skipped;
      continue;
    }
    sum += per_query(docs, it->second);
    ++m.evaluated;
  }
  m.value = m.evaluated ? sum / static_cast<double>(m.evaluated) : 0.0;
  return m;
}

int grade(const std::map<std::string, int>& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace

MetricValue mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  return average(run, qrels, k, [k](const std::vector<std::string>& docs, const auto& judged) {
    const std::size_t cut = std::min(k, docs.size());
    for (std::size_t r = 0; r < cut; ++r) {
      if (grade(judged, docs[r]) > 0) return 1.0 / static_cast<double>(r + 1);
    }
    return 0.0;
  });
}

MetricValue ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  return average(run, qrels, k, [k](const std::vector<std::string>& docs, const auto& judged) {
    const std::size_t cut = std::min(k, docs.size());
    double dcg = 0.0;
    for (std::size_t r = 0; r < cut; ++r) {
      const int rel = grade(judged, docs[r]);
      if (rel > 0) dcg += (std::exp2(rel) - 1.0) / std::log2(static_cast<double>(r + 2));
    }
    std::vector<int> ideal;
    for (const auto& [doc, rel] : judged) {
      if (rel > 0) ideal.push_back(rel);
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r) {
      idcg += (std::exp2(ideal[r]) - 1.0) / std::log2(static_cast<double>(r + 2));
    }
    return dcg / idcg;
  });
}

MetricValue recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  return average(run, qrels, k, [k](const std::vector<std::string>& docs, const auto& judged) {
    std::size_t relevant = 0;
    for (const auto& [doc, rel] : judged) relevant += rel > 0;
    const std::size_t cut = std::min(k, docs.size());
    std::size_t found = 0;
    for (std::size_t r = 0; r < cut; ++r) found += grade(judged, docs[r]) > 0;
    return static_cast<double>(found) / static_cast<double>(relevant);
  });
}

}  // namespace xtr
