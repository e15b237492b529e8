#include "gdcn/crossnet.hpp"

#include <cmath>
#include <string>

namespace gdcn {

GatedCrossParams init_cross_params(int width, uint64_t seed) {
    if (width < 1) throw ConfigError("cross layer width must be positive");
    GatedCrossParams p;
    p.W_c.resize(width, width);
    p.W_g.resize(width, width);
    p.b = Vec::Zero(width);
    double scale = 1.0 / std::sqrt(static_cast<double>(width));
    Rng rng(seed);
    for (Eigen::Index r = 0; r < width; ++r) {
        for (Eigen::Index c = 0; c < width; ++c) p.W_c(r, c) = rng.uniform(-scale, scale);
    }
    for (Eigen::Index r = 0; r < width; ++r) {
        for (Eigen::Index c = 0; c < width; ++c) p.W_g(r, c) = rng.uniform(-scale, scale);
    }
    return p;
}

namespace {

void check_widths(const Mat& c0, const Mat& c_l, const GatedCrossParams& p) {
    if (c0.rows() != c_l.rows() || c0.cols() != c_l.cols() || c0.rows() != p.W_c.rows() ||
        p.W_c.rows() != p.W_c.cols() || p.W_g.rows() != p.W_c.rows() ||
        p.W_g.cols() != p.W_c.cols() || p.b.size() != p.W_c.rows()) {
        throw DataError("cross layer: width mismatch (c0 " + std::to_string(c0.rows()) +
                        ", c_l " + std::to_string(c_l.rows()) + ", W " +
                        std::to_string(p.W_c.rows()) + ")");
    }
}

}  // namespace

Mat gated_cross_forward(const Mat& c0, const Mat& c_l, const GatedCrossParams& p,
                        GateMode gate_mode, CrossLayerCache& cache) {
    check_widths(c0, c_l, p);
    cache.c_l = c_l;
    cache.a = (p.W_c * c_l).colwise() + p.b;
    if (gate_mode == GateMode::AllOnes) {
        cache.g = Mat::Ones(c_l.rows(), c_l.cols());
    } else {
        cache.g = (p.W_g * c_l).unaryExpr([](double x) { return sigmoid(x); });
    }
    return c0.cwiseProduct(cache.a).cwiseProduct(cache.g) + c_l;
}

void gated_cross_backward(const Mat& c0, const CrossLayerCache& cache, const GatedCrossParams& p,
                          const Mat& grad_next, GateMode gate_mode, Mat& grad_c_l,
                          Mat& grad_c0_contribution, CrossLayerGrads& grads) {
    check_widths(c0, cache.c_l, p);
    if (grad_next.rows() != c0.rows() || grad_next.cols() != c0.cols() ||
        cache.a.rows() != c0.rows() || cache.a.cols() != c0.cols()) {
        throw DataError("cross layer backward: cache does not match gradient shape");
    }

    // d_a = ∂L/∂(W_c·c_l + b); the c0 and gate factors are elementwise.
    Mat t = grad_next.cwiseProduct(c0);
    Mat d_a = t.cwiseProduct(cache.g);
    grads.grad_W_c.noalias() = d_a * cache.c_l.transpose();
    grads.grad_b = d_a.rowwise().sum();
    grad_c_l.noalias() = p.W_c.transpose() * d_a;

    if (gate_mode == GateMode::Learned) {
        // d_p = ∂L/∂(W_g·c_l) through σ.
        Mat d_p = t.cwiseProduct(cache.a)
                      .cwiseProduct(cache.g)
                      .cwiseProduct(Mat::Ones(cache.g.rows(), cache.g.cols()) - cache.g);
        grads.grad_W_g.noalias() = d_p * cache.c_l.transpose();
        grad_c_l.noalias() += p.W_g.transpose() * d_p;
    } else {
        grads.grad_W_g = Mat::Zero(p.W_g.rows(), p.W_g.cols());
    }

    grad_c_l += grad_next;  // residual path
    grad_c0_contribution = grad_next.cwiseProduct(cache.a).cwiseProduct(cache.g);
}

CrossStack init_cross_stack(int width, int depth, GateMode gate_mode, uint64_t seed) {
    if (depth < 0) throw ConfigError("cross depth must be non-negative");
    CrossStack stack;
    stack.gate_mode = gate_mode;
    stack.layers.reserve(depth);
    for (int l = 0; l < depth; ++l) {
        stack.layers.push_back(init_cross_params(width, derive_seed(seed, "cross", l)));
    }
    return stack;
}

Mat stack_forward(const Mat& c0, const CrossStack& stack, CrossStackCache& cache) {
    cache.layers.resize(stack.layers.size());
    Mat cur = c0;
    for (size_t l = 0; l < stack.layers.size(); ++l) {
        cur = gated_cross_forward(c0, cur, stack.layers[l], stack.gate_mode, cache.layers[l]);
    }
    return cur;
}

Mat stack_backward(const Mat& c0, const CrossStack& stack, const CrossStackCache& cache,
                   const Mat& grad_out, std::vector<CrossLayerGrads>& grads) {
    if (cache.layers.size() != stack.layers.size()) {
        throw DataError("cross stack backward: cache depth mismatch");
    }
    grads.resize(stack.layers.size());
    Mat grad_cur = grad_out;
    Mat grad_c0_total = Mat::Zero(grad_out.rows(), grad_out.cols());
    Mat grad_input, contribution;
    for (size_t l = stack.layers.size(); l-- > 0;) {
        gated_cross_backward(c0, cache.layers[l], stack.layers[l], grad_cur, stack.gate_mode,
                             grad_input, contribution, grads[l]);
        grad_c0_total += contribution;
        grad_cur = std::move(grad_input);
    }
    // Layer 1 consumed c0 as its input, so what flows out of the chain is
    // also a c0 gradient.
    grad_c0_total += grad_cur;
    return grad_c0_total;
}

}  // namespace gdcn
