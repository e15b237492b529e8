#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdcn/common.hpp"
#include "gdcn/crossnet.hpp"
#include "gdcn/embedding.hpp"
#include "gdcn/features.hpp"
#include "gdcn/mlp.hpp"

namespace gdcn {

enum class Variant { GcnOnly, Stacked, Parallel };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::Parallel;
    int cross_layers = 3;
    std::vector<int> dnn_widths = {400, 400, 400};
    GateMode gate_mode = GateMode::Learned;
    double dropout_rate = 0.5;
    std::vector<int> dims;  // per field; empty means uniform 16
    bool use_alignment = false;
};

struct Model {
    ModelConfig config;
    std::string schema_digest;
    std::vector<uint64_t> field_sizes;

    EmbeddingTables embeddings;
    AlignmentLayer alignment;  // empty unless config.use_alignment
    CrossStack cross;
    MlpParams mlp;
    Vec head_w;

    // Width of c0 as seen by the towers (post-alignment when enabled).
    int input_width() const;
    int dnn_output_width() const;
    int head_width() const;
    uint64_t param_count() const;
};

Model init_model(const DatasetSchema& schema, const ModelConfig& config, uint64_t seed);

struct ForwardCache {
    Mat embedded;  // raw concatenation, pre-alignment
    Mat c0;
    CrossStackCache cross;
    Mat cross_out;
    MlpCache mlp;
    Mat final;   // head input, head_width × B
    Vec logits;  // clamped
    Vec yhat;
};

// ŷ per batch column. `training` enables dropout; `step` keys its masks.
Vec model_forward(const Model& model, const Batch& batch, bool training, uint64_t seed,
                  uint64_t step, ForwardCache& cache);

struct ModelGrads {
    SparseGrad embeddings;
    std::vector<Mat> alignment;
    std::vector<CrossLayerGrads> cross;
    MlpGrads mlp;
    Vec head_w;
};

// grad_logit holds ∂L/∂logit per instance (already scaled by any batch
// mean). Fills every parameter gradient.
void model_backward(const Model& model, const Batch& batch, const ForwardCache& cache,
                    const Vec& grad_logit, ModelGrads& grads);

// loss = −[y ln ŷ + (1−y) ln(1−ŷ)] with ŷ clamped to [1e-15, 1−1e-15].
double logloss(double yhat, int y);

// Mean loss and per-instance logit gradient (ŷ−y)/B.
double batch_logloss(const Vec& yhat, const std::vector<uint8_t>& labels, Vec* grad_logit);

inline constexpr double kLogitClamp = 35.0;

}  // namespace gdcn
