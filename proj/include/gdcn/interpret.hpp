#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdcn/common.hpp"
#include "gdcn/model.hpp"

namespace gdcn {

// Entry (i,j) is the Frobenius norm of the d_i×d_j block of W_c addressed
// by fields i and j; blocks tile the matrix exactly.
Mat block_norms(const Mat& W_c, const std::vector<int>& dims);

// Gate values above this are read as important crosses, below as
// unimportant; raw values are exported so consumers can re-threshold.
inline constexpr double kImportanceThreshold = 0.5;

struct GateProfile {
    std::vector<Vec> bitwise;    // per layer, width D
    std::vector<Vec> fieldwise;  // per layer, width F (mean over the field's bits)
};

// Requires learned gates; an all-ones stack has no gate signal to report.
GateProfile gate_profile(const Model& model, const EncodedInstance& instance);

// Per-layer mean field-wise gate vectors over the first n instances.
std::vector<Vec> aggregate_importance(const Model& model, const EncodedDataset& data, size_t n);

// Flattened dot product over the product of Frobenius norms.
double cosine_similarity(const Mat& A, const Mat& B);

struct PearsonResult {
    double r = 0.0;
    double p_value = 0.0;  // two-sided, via the Student-t tail
};

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Exposed for the significance test; accurate to ~1e-12 for moderate a, b.
double incomplete_beta(double a, double b, double x);

}  // namespace gdcn
