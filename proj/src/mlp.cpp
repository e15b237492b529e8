#include "gdcn/mlp.hpp"

#include <cmath>
#include <string>

namespace gdcn {

MlpParams init_mlp(int input_width, const std::vector<int>& widths, double dropout_rate,
                   uint64_t seed) {
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0,1)");
    }
    MlpParams p;
    p.dropout_rate = dropout_rate;
    int n_in = input_width;
    for (size_t l = 0; l < widths.size(); ++l) {
        if (widths[l] < 1) throw ConfigError("hidden width must be positive");
        MlpParams::Layer layer;
        layer.W.resize(widths[l], n_in);
        layer.b = Vec::Zero(widths[l]);
        double scale = 1.0 / std::sqrt(static_cast<double>(n_in));
        Rng rng(derive_seed(seed, "dnn", l));
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
                layer.W(r, c) = rng.uniform(-scale, scale);
            }
        }
        p.layers.push_back(std::move(layer));
        n_in = widths[l];
    }
    return p;
}

Mat mlp_forward(const Mat& h0, const MlpParams& p, bool training, uint64_t seed, uint64_t step,
                MlpCache& cache) {
    cache.h0 = h0;
    cache.pre.resize(p.layers.size());
    cache.post.resize(p.layers.size());
    cache.mask.assign(p.layers.size(), Mat());

    const bool drop = training && p.dropout_rate > 0.0;
    double keep = 1.0 - p.dropout_rate;
    Mat cur = h0;
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        if (layer.W.cols() != cur.rows()) {
            throw DataError("mlp: layer " + std::to_string(l) + " expects width " +
                            std::to_string(layer.W.cols()) + ", got " +
                            std::to_string(cur.rows()));
        }
        cache.pre[l] = (layer.W * cur).colwise() + layer.b;
        cur = cache.pre[l].cwiseMax(0.0);
        if (drop) {
            Mat& mask = cache.mask[l];
            mask.resize(cur.rows(), cur.cols());
            Rng rng(derive_seed(seed, "dropout", step, l));
            for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                    mask(r, c) = rng.u01() < p.dropout_rate ? 0.0 : 1.0 / keep;
                }
            }
            cur = cur.cwiseProduct(mask);
        }
        cache.post[l] = cur;
    }
    return cur;
}

Mat mlp_backward(const MlpCache& cache, const MlpParams& p, const Mat& grad_out, MlpGrads& grads) {
    if (cache.pre.size() != p.layers.size()) {
        throw DataError("mlp backward: cache does not match parameters");
    }
    grads.grad_W.resize(p.layers.size());
    grads.grad_b.resize(p.layers.size());

    Mat d = grad_out;
    for (size_t l = p.layers.size(); l-- > 0;) {
        if (cache.mask[l].size() > 0) d = d.cwiseProduct(cache.mask[l]);
        // ReLU subgradient: 0 at exactly 0.
        d = d.cwiseProduct(
            cache.pre[l].unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
        const Mat& input = l == 0 ? cache.h0 : cache.post[l - 1];
        grads.grad_W[l].noalias() = d * input.transpose();
        grads.grad_b[l] = d.rowwise().sum();
        d = p.layers[l].W.transpose() * d;
    }
    return d;
}

}  // namespace gdcn
