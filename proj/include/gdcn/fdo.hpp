#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdcn/common.hpp"
#include "gdcn/embedding.hpp"

namespace gdcn {

struct FdoOptions {
    // Subtract per-column means before the spectrum (the PCA reading).
    bool center = true;
    // Measure information as σ² (explained variance) rather than raw σ.
    bool squared_energy = true;
};

// Singular values of the (optionally centered) table, descending,
// min(rows, cols) of them. One-sided Jacobi orthogonalization; exact to
// working precision at these widths.
std::vector<double> singular_values(const RowMat& table, const FdoOptions& options = {});

// Smallest k whose leading energy fraction reaches `ratio`. A zero total
// (constant table) yields 1.
int choose_dim(const std::vector<double>& sv, double ratio, const FdoOptions& options = {});

// Rule-of-thumb baseline: d_f = round(|E_f|^(1/4)), at least 1.
std::vector<int> formula_dims(const std::vector<uint64_t>& field_sizes);

struct ParamSummary {
    uint64_t P_e = 0;    // Σ d_f·|E_f|, exact
    double D_bar = 0.0;  // P_e / T
    double K_bar = 0.0;  // Σ d_f / F
};

ParamSummary param_count(const std::vector<uint64_t>& field_sizes, const std::vector<int>& dims);

struct FdoFieldPlan {
    int field = 0;
    int dim = 0;
    std::vector<double> singular_values;
};

struct FdoRatioPlan {
    double ratio = 0.0;
    std::vector<FdoFieldPlan> fields;
    ParamSummary summary;
};

struct FdoReport {
    std::string source_checkpoint;  // digest of the checkpoint file
    std::vector<FdoRatioPlan> plans;
};

FdoReport fdo_plan(const EmbeddingTables& tables, const std::vector<uint64_t>& field_sizes,
                   const std::vector<double>& ratios, const FdoOptions& options = {});

// Dims file: {source_checkpoint, ratio, fields: [{field, dim,
// singular_values}]}. Readable by train via --dims.
std::string dims_file_text(const FdoRatioPlan& plan, const std::string& source_digest);
std::vector<int> load_dims_file(const std::string& path);

}  // namespace gdcn
