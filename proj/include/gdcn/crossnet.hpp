#pragma once

#include <cstdint>
#include <vector>

#include "gdcn/common.hpp"

namespace gdcn {

enum class GateMode { Learned, AllOnes };

// One gated cross layer: c_next = c0 ⊙ (W_c·c_l + b) ⊙ σ(W_g·c_l) + c_l.
// Under AllOnes the sigmoid factor is the constant 1 and the layer is an
// ungated cross layer; W_g is carried but unused.
struct GatedCrossParams {
    Mat W_c;  // D×D
    Mat W_g;  // D×D
    Vec b;    // D

    int width() const { return static_cast<int>(b.size()); }
};

GatedCrossParams init_cross_params(int width, uint64_t seed);

// Forward cache; columns are batch instances.
struct CrossLayerCache {
    Mat c_l;
    Mat a;  // W_c·c_l + b
    Mat g;  // σ(W_g·c_l), or ones under AllOnes
};

struct CrossLayerGrads {
    Mat grad_W_c;
    Mat grad_W_g;
    Vec grad_b;
};

// Batch forward: c0 and c_l are D×B. Returns c_next and fills the cache.
Mat gated_cross_forward(const Mat& c0, const Mat& c_l, const GatedCrossParams& p,
                        GateMode gate_mode, CrossLayerCache& cache);

// Given grad_next = ∂L/∂c_next, computes exact parameter gradients plus the
// gradients flowing to c_l and (the layer's own contribution to) c0.
void gated_cross_backward(const Mat& c0, const CrossLayerCache& cache, const GatedCrossParams& p,
                          const Mat& grad_next, GateMode gate_mode, Mat& grad_c_l,
                          Mat& grad_c0_contribution, CrossLayerGrads& grads);

struct CrossStack {
    std::vector<GatedCrossParams> layers;
    GateMode gate_mode = GateMode::Learned;

    int depth() const { return static_cast<int>(layers.size()); }
    int width() const { return layers.empty() ? 0 : layers.front().width(); }
};

CrossStack init_cross_stack(int width, int depth, GateMode gate_mode, uint64_t seed);

struct CrossStackCache {
    std::vector<CrossLayerCache> layers;

    // Gate trace for interpretation: layers[l].g.
    const Mat& gate(size_t l) const { return layers[l].g; }
};

// Applies every layer with the same c0. Depth 0 returns c0 unchanged.
Mat stack_forward(const Mat& c0, const CrossStack& stack, CrossStackCache& cache);

// grad_out = ∂L/∂c_Lc. Returns ∂L/∂c0 (including every layer's direct c0
// term) and per-layer parameter gradients.
Mat stack_backward(const Mat& c0, const CrossStack& stack, const CrossStackCache& cache,
                   const Mat& grad_out, std::vector<CrossLayerGrads>& grads);

}  // namespace gdcn
