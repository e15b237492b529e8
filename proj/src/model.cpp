#include "gdcn/model.hpp"

#include <algorithm>
#include <cmath>

namespace gdcn {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::GcnOnly: return "gcn";
        case Variant::Stacked: return "gdcn-s";
        case Variant::Parallel: return "gdcn-p";
    }
    throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "gcn") return Variant::GcnOnly;
    if (name == "gdcn-s") return Variant::Stacked;
    if (name == "gdcn-p") return Variant::Parallel;
    throw ConfigError("unknown variant '" + name + "' (expected gcn, gdcn-s, gdcn-p)");
}

int Model::input_width() const {
    if (config.use_alignment) return alignment.d_max * static_cast<int>(field_sizes.size());
    return embeddings.concat_width();
}

int Model::dnn_output_width() const { return mlp.output_width(input_width()); }

int Model::head_width() const {
    switch (config.variant) {
        case Variant::GcnOnly: return input_width();
        case Variant::Stacked: return dnn_output_width();
        case Variant::Parallel: return input_width() + dnn_output_width();
    }
    throw ConfigError("unknown variant");
}

uint64_t Model::param_count() const {
    uint64_t p = embeddings.param_count() + alignment.param_count();
    for (const auto& layer : cross.layers) {
        p += static_cast<uint64_t>(layer.W_c.size()) + layer.W_g.size() + layer.b.size();
    }
    p += mlp.param_count();
    p += head_w.size();
    return p;
}

Model init_model(const DatasetSchema& schema, const ModelConfig& config, uint64_t seed) {
    Model m;
    m.config = config;
    if (m.config.dims.empty()) m.config.dims.assign(schema.fields.size(), 16);
    if (m.config.dims.size() != schema.fields.size()) {
        throw ConfigError("model dims list has " + std::to_string(m.config.dims.size()) +
                          " entries for " + std::to_string(schema.fields.size()) + " fields");
    }
    m.schema_digest = schema.digest();
    m.field_sizes = schema.field_sizes();
    m.embeddings = init_tables(schema, m.config.dims, derive_seed(seed, "embeddings"));
    if (m.config.use_alignment) {
        m.alignment = init_alignment(m.config.dims, derive_seed(seed, "alignment"));
    }
    int D = m.input_width();
    m.cross = init_cross_stack(D, m.config.cross_layers, m.config.gate_mode,
                               derive_seed(seed, "crossnet"));
    // The cross-only variant has no DNN tower; drop any configured widths so
    // parameter counts and checkpoints carry no dead tensors.
    if (m.config.variant == Variant::GcnOnly) m.config.dnn_widths.clear();
    // Both towers consume a width-D vector: Stacked feeds the DNN c_Lc,
    // Parallel feeds it c0.
    m.mlp = init_mlp(D, m.config.dnn_widths, m.config.dropout_rate, derive_seed(seed, "dnn"));
    int hw = m.head_width();
    m.head_w.resize(hw);
    double scale = 1.0 / std::sqrt(static_cast<double>(hw));
    Rng rng(derive_seed(seed, "head"));
    for (int i = 0; i < hw; ++i) m.head_w(i) = rng.uniform(-scale, scale);
    return m;
}

namespace {

Mat apply_alignment(const Model& model, const Mat& embedded) {
    const auto& dims = model.config.dims;
    const int d_max = model.alignment.d_max;
    Mat out(static_cast<Eigen::Index>(dims.size()) * d_max, embedded.cols());
    Eigen::Index in_off = 0;
    for (size_t f = 0; f < dims.size(); ++f) {
        out.block(static_cast<Eigen::Index>(f) * d_max, 0, d_max, embedded.cols()).noalias() =
            model.alignment.matrices[f].transpose() * embedded.block(in_off, 0, dims[f], embedded.cols());
        in_off += dims[f];
    }
    return out;
}

// Returns grad w.r.t. the raw embedded matrix and fills grad_align.
Mat alignment_backward(const Model& model, const Mat& embedded, const Mat& grad_c0,
                       std::vector<Mat>& grad_align) {
    const auto& dims = model.config.dims;
    const int d_max = model.alignment.d_max;
    Mat grad_emb(embedded.rows(), embedded.cols());
    grad_align.resize(dims.size());
    Eigen::Index in_off = 0;
    for (size_t f = 0; f < dims.size(); ++f) {
        auto g_block = grad_c0.block(static_cast<Eigen::Index>(f) * d_max, 0, d_max, grad_c0.cols());
        auto e_block = embedded.block(in_off, 0, dims[f], embedded.cols());
        grad_align[f].noalias() = e_block * g_block.transpose();
        grad_emb.block(in_off, 0, dims[f], embedded.cols()).noalias() =
            model.alignment.matrices[f] * g_block;
        in_off += dims[f];
    }
    return grad_emb;
}

}  // namespace

Vec model_forward(const Model& model, const Batch& batch, bool training, uint64_t seed,
                  uint64_t step, ForwardCache& cache) {
    cache.embedded = lookup_concat_batch(batch, model.embeddings);
    cache.c0 = model.config.use_alignment ? apply_alignment(model, cache.embedded)
                                          : cache.embedded;
    cache.cross_out = stack_forward(cache.c0, model.cross, cache.cross);

    const Eigen::Index B = cache.c0.cols();
    switch (model.config.variant) {
        case Variant::GcnOnly:
            cache.final = cache.cross_out;
            break;
        case Variant::Stacked:
            cache.final = mlp_forward(cache.cross_out, model.mlp, training, seed, step, cache.mlp);
            break;
        case Variant::Parallel: {
            Mat h = mlp_forward(cache.c0, model.mlp, training, seed, step, cache.mlp);
            cache.final.resize(cache.cross_out.rows() + h.rows(), B);
            cache.final.topRows(cache.cross_out.rows()) = cache.cross_out;
            cache.final.bottomRows(h.rows()) = h;
            break;
        }
    }
    if (cache.final.rows() != model.head_w.size()) {
        throw ConfigError("head width " + std::to_string(model.head_w.size()) +
                          " does not match final vector width " +
                          std::to_string(cache.final.rows()));
    }

    cache.logits = (model.head_w.transpose() * cache.final).transpose();
    cache.yhat.resize(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        double z = std::clamp(cache.logits(i), -kLogitClamp, kLogitClamp);
        cache.logits(i) = z;
        cache.yhat(i) = sigmoid(z);
    }
    return cache.yhat;
}

void model_backward(const Model& model, const Batch& batch, const ForwardCache& cache,
                    const Vec& grad_logit, ModelGrads& grads) {
    const Eigen::Index B = cache.c0.cols();
    if (grad_logit.size() != B) throw DataError("model backward: logit gradient size mismatch");

    grads.head_w.noalias() = cache.final * grad_logit;
    Mat grad_final = model.head_w * grad_logit.transpose();

    Mat grad_c0;
    switch (model.config.variant) {
        case Variant::GcnOnly:
            grad_c0 = stack_backward(cache.c0, model.cross, cache.cross, grad_final, grads.cross);
            break;
        case Variant::Stacked: {
            Mat grad_cross_out = mlp_backward(cache.mlp, model.mlp, grad_final, grads.mlp);
            grad_c0 = stack_backward(cache.c0, model.cross, cache.cross, grad_cross_out,
                                     grads.cross);
            break;
        }
        case Variant::Parallel: {
            Mat grad_cross_out = grad_final.topRows(cache.cross_out.rows());
            Mat grad_h = grad_final.bottomRows(grad_final.rows() - cache.cross_out.rows());
            grad_c0 = stack_backward(cache.c0, model.cross, cache.cross, grad_cross_out,
                                     grads.cross);
            grad_c0 += mlp_backward(cache.mlp, model.mlp, grad_h, grads.mlp);
            break;
        }
    }

    Mat grad_embedded = model.config.use_alignment
                            ? alignment_backward(model, cache.embedded, grad_c0, grads.alignment)
                            : std::move(grad_c0);
    grads.embeddings.reset(model.embeddings);
    scatter_gradient_batch(batch, grad_embedded, model.embeddings, grads.embeddings);
}

double logloss(double yhat, int y) {
    // The clamp window absorbs saturated but legitimate probabilities;
    // anything outside [0,1] is a genuine numeric fault upstream.
    if (!(yhat >= 0.0 && yhat <= 1.0)) {
        throw NumericError("logloss: prediction " + std::to_string(yhat) +
                           " is not a probability");
    }
    double p = std::clamp(yhat, 1e-15, 1.0 - 1e-15);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double batch_logloss(const Vec& yhat, const std::vector<uint8_t>& labels, Vec* grad_logit) {
    if (yhat.size() != static_cast<Eigen::Index>(labels.size()) || labels.empty()) {
        throw DataError("logloss: prediction/label size mismatch");
    }
    const Eigen::Index B = yhat.size();
    double total = 0.0;
    if (grad_logit) grad_logit->resize(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        total += logloss(yhat(i), labels[i]);
        if (grad_logit) (*grad_logit)(i) = (yhat(i) - static_cast<double>(labels[i])) / B;
    }
    return total / static_cast<double>(B);
}

}  // namespace gdcn
