#include "xtr/cost_model.hpp"

#include <cmath>
#include <limits>

namespace xtr {

namespace {

using Wide = unsigned __int128;

std::uint64_t narrow(Wide v, const char* what) {
  if (v > std::numeric_limits<std::uint64_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " overflows 64 bits");
  }
  return static_cast<std::uint64_t>(v);
}

Wide rounded_m_bar(const CostModelParams& p) {
  return static_cast<Wide>(std::llround(p.m_bar));
}

}  // namespace

void CostModelParams::validate() const {
  if (!std::isfinite(m_bar) || m_bar < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "m_bar must be finite and >= 0");
  }
  if (!std::isfinite(r_bar) || r_bar < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "r_bar must be finite and >= 0");
  }
  if (r_bar > static_cast<double>(n) * static_cast<double>(k_prime)) {
    throw Error(ErrorCode::kInvalidArgument, "r_bar cannot exceed n * k'");
  }
}

std::uint64_t flops_colbert_scoring(const CostModelParams& p) {
  p.validate();
  const Wide m = rounded_m_bar(p);
  const Wide per_doc = 2 * m * p.d + m + 1;
  return narrow(Wide{p.n} * p.n * p.k_prime * per_doc, "colbert FLOPs");
}

std::uint64_t flops_xtr_scoring(const CostModelParams& p) {
  p.validate();
  const long double v = static_cast<long double>(p.n) * p.n * p.k_prime *
                        (static_cast<long double>(p.r_bar) + 1.0L);
  if (v > static_cast<long double>(std::numeric_limits<long long>::max())) {
    throw Error(ErrorCode::kInvalidArgument, "xtr FLOPs overflows 64 bits");
  }
  return static_cast<std::uint64_t>(std::llroundl(v));
}

std::uint64_t values_gathered(const CostModelParams& p) {
  p.validate();
  return narrow(Wide{p.n} * p.k_prime * rounded_m_bar(p) * p.d, "gathered values");
}

std::uint64_t bytes_gathered(const CostModelParams& p) {
  return narrow(Wide{values_gathered(p)} * sizeof(float), "gathered bytes");
}

MeasuredCost measure(const RankedRun& run) {
  MeasuredCost c;
  for (const auto& q : run.queries) {
    c.candidates += q.stats.candidates;
    c.scoring_flops += q.stats.scoring_flops;
    c.bytes_gathered += q.stats.bytes_gathered;
  }
  return c;
}

}  // namespace xtr
