#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdcn/fdo.hpp"
#include "gdcn/interpret.hpp"
#include "gdcn/model.hpp"
#include "gdcn/training.hpp"

namespace gdcn {

// Shared command implementations. The CLI and the python module are thin
// adapters over these.

struct PrepOptions {
    std::string data_path;
    std::string fields_path;
    std::string out_dir;
    uint32_t threshold = 10;
    std::array<double, 3> ratios = {0.8, 0.1, 0.1};
    uint64_t seed = 0;
};

struct PrepResult {
    std::string schema_path;
    std::string train_path;
    std::string val_path;
    std::string test_path;
    size_t n_train = 0;
    size_t n_val = 0;
    size_t n_test = 0;
    uint64_t total_features = 0;
    std::string schema_digest;
};

PrepResult run_prep(const PrepOptions& options);

struct TrainOptions {
    std::string train_path;
    std::string val_path;
    std::string schema_path;
    std::string out_dir;
    std::string dims_path;  // optional; overrides the uniform dim

    std::string variant = "gdcn-p";
    int cross_layers = 3;
    std::vector<int> dnn_widths = {400, 400, 400};
    bool gate_on = true;
    bool use_alignment = false;
    double dropout = 0.5;
    int embed_dim = 16;

    TrainConfig train;
};

struct TrainOutput {
    std::string checkpoint_path;
    std::string log_path;
    TrainResult result;
    EvalResult best_val;
};

TrainOutput run_train(const TrainOptions& options);

struct FdoRunOptions {
    std::string checkpoint_path;
    std::string out_dir;
    std::vector<double> ratios = {0.95};
    FdoOptions analysis;
};

struct FdoOutput {
    std::string report_path;
    std::vector<std::string> dims_paths;
    FdoReport report;
};

FdoOutput run_fdo(const FdoRunOptions& options);

struct EvalOptions {
    std::string checkpoint_path;
    std::string data_path;
    std::string schema_path;
    int batch_size = 4096;
    std::string out_path;  // optional metrics JSON
};

struct EvalOutput {
    EvalResult metrics;
    std::string json_text;
};

EvalOutput run_eval(const EvalOptions& options);

struct ExplainOptions {
    std::string checkpoint_path;
    std::string data_path;
    std::string out_dir;
    std::vector<uint32_t> instances;  // ordinals into the encoded split
    size_t importance_n = 1000;
    double ratio = 0.95;
    std::string compare_checkpoint;  // optional second model for similarity
};

struct ExplainOutput {
    std::vector<std::string> files;
    PearsonResult dims_vs_importance;
    std::optional<double> cosine;  // set when a comparison model was given
};

ExplainOutput run_explain(const ExplainOptions& options);

}  // namespace gdcn
