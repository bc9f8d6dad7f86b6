#include "xtr/training_objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xtr {

BatchAffinity MiniBatch::affinities() const {
  if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "mini-batch has no documents");
  if (positive >= docs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "positive index outside the batch");
  }
  BatchAffinity out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(affinity(query, d));
  return out;
}

namespace {

void check_scores(std::span<const double> scores, std::size_t positive) {
  if (scores.empty()) throw Error(ErrorCode::kInvalidArgument, "cross-entropy needs B >= 1");
  if (positive >= scores.size()) {
    throw Error(ErrorCode::kInvalidArgument, "positive index outside the batch");
  }
  for (std::size_t b = 0; b < scores.size(); ++b) {
    if (!std::isfinite(scores[b])) {
      throw Error(ErrorCode::kNonFinite, "non-finite score for document " + std::to_string(b), b);
    }
  }
}

// Index of the maximum among aligned entries of row i, or npos.
std::size_t aligned_argmax(const AffinityMatrix& p, const AlignmentMatrix& a, std::size_t i) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t j = 0; j < p.cols(); ++j) {
    if (a.aligned(i, j) && (best == std::numeric_limits<std::size_t>::max() || p(i, j) > p(i, best))) {
      best = j;
    }
  }
  return best;
}

void check_alignment(const BatchAffinity& p, std::span<const AlignmentMatrix> a) {
  if (p.size() != a.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one alignment matrix per batch document required");
  }
}

}  // namespace

double ce_loss(std::span<const double> scores, std::size_t positive) {
  check_scores(scores, positive);
  const double shift = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - shift);
  return -scores[positive] + shift + std::log(sum);
}

std::vector<double> softmax(std::span<const double> scores) {
  const double shift = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    p[b] = std::exp(scores[b] - shift);
    sum += p[b];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> colbert_scores(const BatchAffinity& p) {
  std::vector<double> s;
  s.reserve(p.size());
  for (const auto& m : p) s.push_back(score_colbert(m));
  return s;
}

std::vector<double> xtr_train_scores(const BatchAffinity& p,
                                     std::span<const AlignmentMatrix> a) {
  check_alignment(p, a);
  std::vector<double> s;
  s.reserve(p.size());
  for (std::size_t b = 0; b < p.size(); ++b) s.push_back(score_xtr_train(p[b], a[b]));
  return s;
}

double loss_som(const BatchAffinity& p, std::size_t positive) {
  return ce_loss(colbert_scores(p), positive);
}

double loss_xtr(const BatchAffinity& p, std::span<const AlignmentMatrix> a,
                std::size_t positive) {
  return ce_loss(xtr_train_scores(p, a), positive);
}

BatchAffinity grad_som(const BatchAffinity& p, std::size_t positive) {
  const auto scores = colbert_scores(p);
  check_scores(scores, positive);
  const auto prob = softmax(scores);
  BatchAffinity grad;
  for (std::size_t b = 0; b < p.size(); ++b) {
    AffinityMatrix g(p[b].rows(), p[b].cols(), 0.0);
    const double coeff =
        (prob[b] - (b == positive ? 1.0 : 0.0)) / static_cast<double>(p[b].rows());
    const auto a = align_row_max(p[b]);
    for (std::size_t i = 0; i < p[b].rows(); ++i) {
      for (std::size_t j = 0; j < p[b].cols(); ++j) {
        if (a.aligned(i, j)) g(i, j) = coeff;
      }
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

BatchAffinity grad_xtr(const BatchAffinity& p, std::span<const AlignmentMatrix> a,
                       std::size_t positive) {
  const auto scores = xtr_train_scores(p, a);
  check_scores(scores, positive);
  const auto prob = softmax(scores);
  bool any_retrieved = false;
  BatchAffinity grad;
  for (std::size_t b = 0; b < p.size(); ++b) {
    AffinityMatrix g(p[b].rows(), p[b].cols(), 0.0);
    const std::size_t z = a[b].aligned_rows();
    if (z > 0) {
      any_retrieved = true;
      const double coeff = (prob[b] - (b == positive ? 1.0 : 0.0)) / static_cast<double>(z);
      for (std::size_t i = 0; i < p[b].rows(); ++i) {
        const auto j = aligned_argmax(p[b], a[b], i);
        if (j != std::numeric_limits<std::size_t>::max()) g(i, j) = coeff;
      }
    }
    grad.push_back(std::move(g));
  }
  if (!any_retrieved) {
    throw Error(ErrorCode::kUndefined,
                "in-batch gradient undefined: no document retrieved any token (Z = 0)");
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

double GradReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.rel_error);
  return m;
}

double GradReport::median_rel_error() const {
  if (entries.empty()) return 0.0;
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.rel_error);
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

GradReport finite_diff_check(const BatchLoss& loss, const BatchAffinity& point,
                             const BatchAffinity& analytic, double h,
                             const BatchStructure& structure) {
  if (!(h > 0.0 && h <= 1e-2)) {
    throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be in (0, 1e-2]");
  }
  if (analytic.size() != point.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "analytic gradient shape differs from point");
  }
  GradReport report;
  BatchAffinity x = point;
  const auto base = structure ? structure(x) : std::vector<std::size_t>{};
  for (std::size_t b = 0; b < x.size(); ++b) {
    if (analytic[b].rows() != x[b].rows() || analytic[b].cols() != x[b].cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "analytic gradient shape differs from point", b);
    }
    for (std::size_t i = 0; i < x[b].rows(); ++i) {
      for (std::size_t j = 0; j < x[b].cols(); ++j) {
        const double orig = x[b](i, j);
        GradEntry e{b, i, j, analytic[b](i, j), 0.0, 0.0};

        x[b](i, j) = orig + h;
        const bool kink_up = structure && structure(x) != base;
        const double up = loss(x);
        x[b](i, j) = orig - h;
        const bool kink_down = structure && structure(x) != base;
        const double down = loss(x);
        x[b](i, j) = orig;

        if (kink_up || kink_down) {
          report.non_differentiable.push_back(e);
          continue;
        }
        e.numeric = (up - down) / (2.0 * h);
        e.rel_error = relative_error(e.analytic, e.numeric);
        report.entries.push_back(e);
      }
    }
  }
  return report;
}

std::vector<std::size_t> row_argmax_structure(const BatchAffinity& p) {
  std::vector<std::size_t> s;
  for (const auto& m : p) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto r = m.row(i);
      s.push_back(static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()));
    }
  }
  return s;
}

std::vector<std::size_t> aligned_argmax_structure(const BatchAffinity& p,
                                                  std::span<const AlignmentMatrix> a) {
  check_alignment(p, a);
  std::vector<std::size_t> s;
  for (std::size_t b = 0; b < p.size(); ++b) {
    for (std::size_t i = 0; i < p[b].rows(); ++i) s.push_back(aligned_argmax(p[b], a[b], i));
  }
  return s;
}

}  // namespace xtr
