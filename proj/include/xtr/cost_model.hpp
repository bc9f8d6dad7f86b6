#pragma once

// Scoring-stage FLOPs per query, assuming the worst case of n*k' distinct
// candidates. One multiply-add counts as 2 FLOPs.
//
//   sum-of-max rescoring   n^2 k' (2 m d + m + 1)
//   retrieved-token score  n^2 k' (r + 1)
//
// m is the mean document length (rounded to the nearest integer) and r the
// mean number of retrieved tokens per candidate.

#include <cstddef>
#include <cstdint>

#include "xtr/inference_pipeline.hpp"

namespace xtr {

struct CostModelParams {
  std::uint64_t n = 0;        // query tokens
  std::uint64_t d = 0;        // embedding dim
  std::uint64_t k_prime = 0;  // tokens retrieved per query token
  double m_bar = 0.0;         // mean document length
  double r_bar = 0.0;         // mean retrieved tokens per candidate
  std::uint64_t M = 0;        // corpus tokens (informational)
  std::uint64_t L = 0;        // documents (informational)

  void validate() const;
};

std::uint64_t flops_colbert_scoring(const CostModelParams& p);
std::uint64_t flops_xtr_scoring(const CostModelParams& p);
// Bytes moved by the gathering stage: n k' m d float32 values.
std::uint64_t bytes_gathered(const CostModelParams& p);
// Same quantity as a count of float values.
std::uint64_t values_gathered(const CostModelParams& p);

// Totals of the instrumentation counters over a run, for comparison with the
// closed forms above.
struct MeasuredCost {
  std::uint64_t candidates = 0;
  std::uint64_t scoring_flops = 0;
  std::uint64_t bytes_gathered = 0;
};

MeasuredCost measure(const RankedRun& run);

}  // namespace xtr
