#pragma once

// Cross-entropy over in-batch documents for the sum-of-max and in-batch
// token retrieval objectives, their closed-form gradients with respect to
// the affinity entries, and a central finite-difference checker.
//
// Gradients are taken with the argmax/alignment structure held fixed. Only
// the selected maximum of each row carries gradient:
//
//   sum-of-max   dL/dP_b[i, argmax] = (p_b - [b == b+]) / n
//   in-batch     dL/dP_b[i, jbar]   = (p_b - [b == b+]) / Z_b   (Z_b > 0)
//
// where p_b is the softmax probability of document b.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "xtr/scoring.hpp"

namespace xtr {

using BatchAffinity = std::vector<AffinityMatrix>;

struct MiniBatch {
  TokenMatrix query;
  std::vector<TokenMatrix> docs;
  std::size_t positive = 0;

  BatchAffinity affinities() const;
};

double ce_loss(std::span<const double> scores, std::size_t positive);
std::vector<double> softmax(std::span<const double> scores);

std::vector<double> colbert_scores(const BatchAffinity& p);
std::vector<double> xtr_train_scores(const BatchAffinity& p,
                                     std::span<const AlignmentMatrix> a);

double loss_som(const BatchAffinity& p, std::size_t positive);
double loss_xtr(const BatchAffinity& p, std::span<const AlignmentMatrix> a,
                std::size_t positive);

BatchAffinity grad_som(const BatchAffinity& p, std::size_t positive);
// Throws ErrorCode::kUndefined when no document has Z > 0.
BatchAffinity grad_xtr(const BatchAffinity& p, std::span<const AlignmentMatrix> a,
                       std::size_t positive);

struct GradEntry {
  std::size_t doc = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradReport {
  std::vector<GradEntry> entries;
  std::vector<GradEntry> non_differentiable;  // excluded kinks (numeric unset)

  double max_rel_error() const;
  double median_rel_error() const;
};

// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

using BatchLoss = std::function<double(const BatchAffinity&)>;
// Discrete structure (argmax choices) of a point; a change under
// perturbation marks the entry as a kink.
using BatchStructure = std::function<std::vector<std::size_t>(const BatchAffinity&)>;

// Central differences (L(x+h) - L(x-h)) / 2h for every entry of `point`.
// h must lie in (0, 1e-2].
GradReport finite_diff_check(const BatchLoss& loss, const BatchAffinity& point,
                             const BatchAffinity& analytic, double h,
                             const BatchStructure& structure = {});

std::vector<std::size_t> row_argmax_structure(const BatchAffinity& p);
std::vector<std::size_t> aligned_argmax_structure(const BatchAffinity& p,
                                                  std::span<const AlignmentMatrix> a);

}  // namespace xtr
