#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdcn/common.hpp"
#include "gdcn/model.hpp"

namespace gdcn {

enum class Monitor { ValidationAUC, ValidationLogLoss };

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 4096;
    int plateau_patience = 3;
    double plateau_factor = 0.1;
    int early_stop_patience = 5;
    double improvement_eps = 1e-6;
    int max_epochs = 50;
    uint64_t seed = 0;
    Monitor monitor = Monitor::ValidationAUC;
    // Wall-clock timing in the epoch log; off writes 0.0 so two identical
    // runs produce byte-identical logs.
    bool wall_timing = true;

    void validate() const;
};

// Adam over every model tensor. Embedding rows an update never touched
// keep their values and moments (sparse semantics); the step counter t is
// global, so bias correction is shared.
class AdamOptimizer {
public:
    explicit AdamOptimizer(Model& model);

    // Applies one update. Throws NumericError on non-finite gradients.
    void step(const ModelGrads& grads, double lr);

    int64_t steps() const { return t_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    Model* model_;
    int64_t t_ = 0;
    std::vector<RowMat> emb_m_, emb_v_;
    std::vector<Mat> align_m_, align_v_;
    std::vector<Mat> cross_m_, cross_v_;  // W_c, W_g interleaved per layer
    std::vector<Vec> cross_b_m_, cross_b_v_;
    std::vector<Mat> dnn_m_, dnn_v_;
    std::vector<Vec> dnn_b_m_, dnn_b_v_;
    Vec head_m_, head_v_;
};

// Learning rate implied by a metric history: each run of `patience`
// consecutive non-improving epochs multiplies the rate by `factor`.
// Improvement means beating the best seen value by at least `eps`.
double scheduled_lr(const std::vector<double>& history, bool higher_better, double base_lr,
                    int patience, double factor, double eps);

struct EarlyStopDecision {
    bool stop = false;
    int best_epoch = 0;  // index into the history
};

EarlyStopDecision early_stop(const std::vector<double>& history, bool higher_better, int patience,
                             double eps);

struct EvalResult {
    double auc = 0.0;
    double logloss = 0.0;
    size_t n = 0;
};

EvalResult evaluate(const Model& model, const EncodedDataset& data, int batch_size);

struct TrainResult {
    std::vector<std::string> epoch_log;  // one JSON object per line
    int best_epoch = -1;                 // 0-based; -1 when no epoch ran
    bool stopped_early = false;
    bool diverged = false;
};

// Trains in place; on early stop or divergence the model is restored to
// the best epoch's snapshot.
TrainResult train(Model& model, const EncodedDataset& train_data, const EncodedDataset& val_data,
                  const TrainConfig& cfg);

}  // namespace gdcn
