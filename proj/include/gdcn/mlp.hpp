#pragma once

#include <cstdint>
#include <vector>

#include "gdcn/common.hpp"

namespace gdcn {

// Hidden tower: ReLU after every layer, inverted dropout after every
// activation while training. An empty layer list is the identity map.
struct MlpParams {
    struct Layer {
        Mat W;  // n_out × n_in
        Vec b;
    };
    std::vector<Layer> layers;
    double dropout_rate = 0.0;

    int output_width(int input_width) const {
        return layers.empty() ? input_width : static_cast<int>(layers.back().b.size());
    }

    uint64_t param_count() const {
        uint64_t p = 0;
        for (const auto& l : layers) {
            p += static_cast<uint64_t>(l.W.rows()) * l.W.cols() + l.b.size();
        }
        return p;
    }
};

MlpParams init_mlp(int input_width, const std::vector<int>& widths, double dropout_rate,
                   uint64_t seed);

struct MlpCache {
    Mat h0;
    std::vector<Mat> pre;   // W·h + b
    std::vector<Mat> post;  // after ReLU and dropout
    std::vector<Mat> mask;  // dropout scales; empty rows when not training
};

// Dropout masks are regenerated from (seed, step, layer), so replaying a
// step replays its masks; that is what lets finite-difference checks hold
// the mask fixed.
Mat mlp_forward(const Mat& h0, const MlpParams& p, bool training, uint64_t seed, uint64_t step,
                MlpCache& cache);

struct MlpGrads {
    std::vector<Mat> grad_W;
    std::vector<Vec> grad_b;
};

Mat mlp_backward(const MlpCache& cache, const MlpParams& p, const Mat& grad_out, MlpGrads& grads);

}  // namespace gdcn
