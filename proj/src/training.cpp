#include "gdcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gdcn/metrics.hpp"

namespace gdcn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (plateau_patience < 1 || early_stop_patience < 1) {
        throw ConfigError("patience values must be at least 1");
    }
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
        throw ConfigError("plateau factor must lie in (0,1)");
    }
    if (max_epochs < 0) throw ConfigError("max epochs must be non-negative");
}

// ============================================================
// Adam
// ============================================================

AdamOptimizer::AdamOptimizer(Model& model) : model_(&model) {
    for (const auto& t : model.embeddings.tables) {
        emb_m_.push_back(RowMat::Zero(t.rows(), t.cols()));
        emb_v_.push_back(RowMat::Zero(t.rows(), t.cols()));
    }
    for (const auto& m : model.alignment.matrices) {
        align_m_.push_back(Mat::Zero(m.rows(), m.cols()));
        align_v_.push_back(Mat::Zero(m.rows(), m.cols()));
    }
    for (const auto& layer : model.cross.layers) {
        cross_m_.push_back(Mat::Zero(layer.W_c.rows(), layer.W_c.cols()));
        cross_v_.push_back(Mat::Zero(layer.W_c.rows(), layer.W_c.cols()));
        cross_m_.push_back(Mat::Zero(layer.W_g.rows(), layer.W_g.cols()));
        cross_v_.push_back(Mat::Zero(layer.W_g.rows(), layer.W_g.cols()));
        cross_b_m_.push_back(Vec::Zero(layer.b.size()));
        cross_b_v_.push_back(Vec::Zero(layer.b.size()));
    }
    for (const auto& layer : model.mlp.layers) {
        dnn_m_.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
        dnn_v_.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
        dnn_b_m_.push_back(Vec::Zero(layer.b.size()));
        dnn_b_v_.push_back(Vec::Zero(layer.b.size()));
    }
    head_m_ = Vec::Zero(model.head_w.size());
    head_v_ = Vec::Zero(model.head_w.size());
}

namespace {

template <typename T>
void check_finite(const T& grad, const char* what) {
    if (!grad.allFinite()) {
        throw NumericError(std::string("non-finite gradient in ") + what);
    }
}

// In-place bias-corrected Adam update on one tensor.
template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, double lr, double bc1, double bc2) {
    m.array() = AdamOptimizer::kBeta1 * m.array() + (1.0 - AdamOptimizer::kBeta1) * grad.array();
    v.array() =
        AdamOptimizer::kBeta2 * v.array() + (1.0 - AdamOptimizer::kBeta2) * grad.array().square();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + AdamOptimizer::kEps);
}

}  // namespace

void AdamOptimizer::step(const ModelGrads& grads, double lr) {
    Model& m = *model_;
    ++t_;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));

    // Embedding rows: only touched rows move; their moments update with the
    // global step's bias correction, untouched rows keep everything.
    for (size_t f = 0; f < m.embeddings.tables.size(); ++f) {
        if (f >= grads.embeddings.rows.size()) break;
        const auto& field_rows = grads.embeddings.rows[f];
        std::vector<uint32_t> touched;
        touched.reserve(field_rows.size());
        for (const auto& [row, g] : field_rows) touched.push_back(row);
        std::sort(touched.begin(), touched.end());
        for (uint32_t row : touched) {
            const Vec& g = field_rows.at(row);
            check_finite(g, "embedding table");
            auto p = m.embeddings.tables[f].row(row).transpose();
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                double& mm = emb_m_[f](row, i);
                double& vv = emb_v_[f](row, i);
                mm = kBeta1 * mm + (1.0 - kBeta1) * g(i);
                vv = kBeta2 * vv + (1.0 - kBeta2) * g(i) * g(i);
                p(i) -= lr * (mm / bc1) / (std::sqrt(vv / bc2) + kEps);
            }
        }
    }

    if (m.config.use_alignment) {
        if (grads.alignment.size() != m.alignment.matrices.size()) {
            throw DataError("adam: alignment gradient count mismatch");
        }
        for (size_t f = 0; f < m.alignment.matrices.size(); ++f) {
            check_finite(grads.alignment[f], "alignment");
            adam_update(m.alignment.matrices[f], grads.alignment[f], align_m_[f], align_v_[f],
                        lr, bc1, bc2);
        }
    }

    if (grads.cross.size() != m.cross.layers.size()) {
        throw DataError("adam: cross gradient count mismatch");
    }
    for (size_t l = 0; l < m.cross.layers.size(); ++l) {
        check_finite(grads.cross[l].grad_W_c, "cross W_c");
        check_finite(grads.cross[l].grad_W_g, "cross W_g");
        check_finite(grads.cross[l].grad_b, "cross bias");
        adam_update(m.cross.layers[l].W_c, grads.cross[l].grad_W_c, cross_m_[2 * l],
                    cross_v_[2 * l], lr, bc1, bc2);
        adam_update(m.cross.layers[l].W_g, grads.cross[l].grad_W_g, cross_m_[2 * l + 1],
                    cross_v_[2 * l + 1], lr, bc1, bc2);
        adam_update(m.cross.layers[l].b, grads.cross[l].grad_b, cross_b_m_[l], cross_b_v_[l], lr,
                    bc1, bc2);
    }

    if (grads.mlp.grad_W.size() != m.mlp.layers.size()) {
        throw DataError("adam: dnn gradient count mismatch");
    }
    for (size_t l = 0; l < m.mlp.layers.size(); ++l) {
        check_finite(grads.mlp.grad_W[l], "dnn weights");
        check_finite(grads.mlp.grad_b[l], "dnn bias");
        adam_update(m.mlp.layers[l].W, grads.mlp.grad_W[l], dnn_m_[l], dnn_v_[l], lr, bc1, bc2);
        adam_update(m.mlp.layers[l].b, grads.mlp.grad_b[l], dnn_b_m_[l], dnn_b_v_[l], lr, bc1,
                    bc2);
    }

    check_finite(grads.head_w, "head");
    adam_update(m.head_w, grads.head_w, head_m_, head_v_, lr, bc1, bc2);
}

// ============================================================
// Schedules
// ============================================================

namespace {

bool improves(double value, double best, bool higher_better, double eps) {
    return higher_better ? value - best >= eps : best - value >= eps;
}

}  // namespace

double scheduled_lr(const std::vector<double>& history, bool higher_better, double base_lr,
                    int patience, double factor, double eps) {
    if (history.empty()) throw ConfigError("scheduled_lr: empty history");
    double lr = base_lr;
    double best = history[0];
    int bad = 0;
    for (size_t i = 1; i < history.size(); ++i) {
        if (improves(history[i], best, higher_better, eps)) {
            best = history[i];
            bad = 0;
        } else if (++bad >= patience) {
            lr *= factor;
            bad = 0;
        }
    }
    return lr;
}

EarlyStopDecision early_stop(const std::vector<double>& history, bool higher_better, int patience,
                             double eps) {
    EarlyStopDecision d;
    if (history.empty()) return d;
    double best = history[0];
    int bad = 0;
    for (size_t i = 1; i < history.size(); ++i) {
        if (improves(history[i], best, higher_better, eps)) {
            best = history[i];
            d.best_epoch = static_cast<int>(i);
            bad = 0;
        } else if (++bad >= patience) {
            d.stop = true;
            return d;
        }
    }
    return d;
}

// ============================================================
// Evaluation and the training loop
// ============================================================

EvalResult evaluate(const Model& model, const EncodedDataset& data, int batch_size) {
    if (data.row_count() == 0) throw DataError("evaluate: empty dataset");
    std::vector<uint32_t> ids(data.row_count());
    std::iota(ids.begin(), ids.end(), 0u);

    std::vector<double> scores;
    scores.reserve(data.row_count());
    ForwardCache cache;
    for (size_t begin = 0; begin < ids.size(); begin += batch_size) {
        size_t end = std::min(ids.size(), begin + batch_size);
        Batch batch = make_batch(data, ids, begin, end);
        Vec yhat = model_forward(model, batch, /*training=*/false, 0, 0, cache);
        for (Eigen::Index i = 0; i < yhat.size(); ++i) scores.push_back(yhat(i));
    }

    EvalResult out;
    out.n = data.row_count();
    out.logloss = mean_logloss(scores, data.labels);
    out.auc = auc(scores, data.labels);
    return out;
}

TrainResult train(Model& model, const EncodedDataset& train_data, const EncodedDataset& val_data,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.row_count() == 0 || val_data.row_count() == 0) {
        throw DataError("train: empty split");
    }

    TrainResult result;
    AdamOptimizer optimizer(model);
    const bool higher_better = cfg.monitor == Monitor::ValidationAUC;
    std::vector<double> history;
    Model best_snapshot = model;
    int best_epoch = -1;
    uint64_t step = 0;

    std::vector<uint32_t> ids(train_data.row_count());
    std::iota(ids.begin(), ids.end(), 0u);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto started = std::chrono::steady_clock::now();
        double lr = history.empty()
                        ? cfg.learning_rate
                        : scheduled_lr(history, higher_better, cfg.learning_rate,
                                       cfg.plateau_patience, cfg.plateau_factor,
                                       cfg.improvement_eps);

        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(ids);

        double loss_sum = 0.0;
        bool diverged = false;
        ForwardCache cache;
        ModelGrads grads;
        Vec grad_logit;
        for (size_t begin = 0; begin < ids.size(); begin += cfg.batch_size) {
            size_t end = std::min(ids.size(), begin + static_cast<size_t>(cfg.batch_size));
            Batch batch = make_batch(train_data, ids, begin, end);
            Vec yhat = model_forward(model, batch, /*training=*/true, cfg.seed, step, cache);
            double batch_loss;
            try {
                batch_loss = batch_logloss(yhat, batch.labels, &grad_logit);
            } catch (const NumericError&) {
                diverged = true;
                break;
            }
            if (!std::isfinite(batch_loss)) {
                diverged = true;
                break;
            }
            loss_sum += batch_loss * static_cast<double>(end - begin);
            model_backward(model, batch, cache, grad_logit, grads);
            try {
                optimizer.step(grads, lr);
            } catch (const NumericError&) {
                diverged = true;
                break;
            }
            ++step;
        }
        if (diverged) {
            if (best_epoch >= 0) model = best_snapshot;
            result.diverged = true;
            break;
        }

        EvalResult val = evaluate(model, val_data, cfg.batch_size);
        history.push_back(higher_better ? val.auc : val.logloss);

        double seconds = 0.0;
        if (cfg.wall_timing) {
            seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                          .count();
        }
        nlohmann::json line;
        line["epoch"] = epoch + 1;
        line["lr"] = lr;
        line["train_logloss"] = loss_sum / static_cast<double>(train_data.row_count());
        line["val_logloss"] = val.logloss;
        line["val_auc"] = val.auc;
        line["seconds"] = seconds;
        result.epoch_log.push_back(line.dump());

        EarlyStopDecision decision =
            early_stop(history, higher_better, cfg.early_stop_patience, cfg.improvement_eps);
        if (decision.best_epoch == epoch || best_epoch < 0) {
            best_snapshot = model;
            best_epoch = epoch;
        }
        if (decision.stop) {
            result.stopped_early = true;
            break;
        }
    }

    if (best_epoch >= 0) {
        model = best_snapshot;
        result.best_epoch = best_epoch;
    }
    return result;
}

}  // namespace gdcn
