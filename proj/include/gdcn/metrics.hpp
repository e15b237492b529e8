#pragma once

#include <cstdint>
#include <vector>

#include "gdcn/common.hpp"

namespace gdcn {

// Rank-statistic AUC with average ranks on tied scores. Agrees exactly
// (not just approximately) with the pairwise definition
// P(s⁺ > s⁻) + ½·P(s⁺ = s⁻): both numerators are half-integers, so the
// double arithmetic is exact below 2^52.
double auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// Mean binary cross-entropy over parallel arrays.
double mean_logloss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels);

}  // namespace gdcn
