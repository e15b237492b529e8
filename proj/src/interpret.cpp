#include "gdcn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gdcn {

Mat block_norms(const Mat& W_c, const std::vector<int>& dims) {
    Eigen::Index D = 0;
    for (int d : dims) {
        if (d < 1) throw ConfigError("block_norms: dims must be positive");
        D += d;
    }
    if (W_c.rows() != D || W_c.cols() != D) {
        throw DataError("block_norms: dims tile " + std::to_string(D) + ", matrix is " +
                        std::to_string(W_c.rows()) + "×" + std::to_string(W_c.cols()));
    }
    const size_t F = dims.size();
    Mat out(F, F);
    Eigen::Index row_off = 0;
    for (size_t i = 0; i < F; ++i) {
        Eigen::Index col_off = 0;
        for (size_t j = 0; j < F; ++j) {
            out(i, j) = W_c.block(row_off, col_off, dims[i], dims[j]).norm();
            col_off += dims[j];
        }
        row_off += dims[i];
    }
    return out;
}

namespace {

// Per-field segment widths of c0 as the cross network sees it.
std::vector<int> c0_segments(const Model& model) {
    if (model.config.use_alignment) {
        return std::vector<int>(model.config.dims.size(), model.alignment.d_max);
    }
    return model.config.dims;
}

Vec fieldwise_mean(const Vec& bitwise, const std::vector<int>& segments) {
    Vec out(segments.size());
    Eigen::Index off = 0;
    for (size_t f = 0; f < segments.size(); ++f) {
        out(f) = bitwise.segment(off, segments[f]).mean();
        off += segments[f];
    }
    return out;
}

}  // namespace

GateProfile gate_profile(const Model& model, const EncodedInstance& instance) {
    if (model.config.gate_mode != GateMode::Learned) {
        throw ConfigError("gate profile requires learned gates; this model runs all-ones gates");
    }
    Batch batch;
    batch.field_count = static_cast<uint32_t>(instance.indices.size());
    batch.indices = instance.indices;
    batch.labels = {instance.label};

    ForwardCache cache;
    model_forward(model, batch, /*training=*/false, 0, 0, cache);

    auto segments = c0_segments(model);
    GateProfile profile;
    for (size_t l = 0; l < cache.cross.layers.size(); ++l) {
        Vec bits = cache.cross.gate(l).col(0);
        profile.fieldwise.push_back(fieldwise_mean(bits, segments));
        profile.bitwise.push_back(std::move(bits));
    }
    return profile;
}

std::vector<Vec> aggregate_importance(const Model& model, const EncodedDataset& data, size_t n) {
    if (model.config.gate_mode != GateMode::Learned) {
        throw ConfigError("field importance requires learned gates");
    }
    if (data.row_count() == 0) throw DataError("aggregate_importance: empty sample");
    if (n < 1) throw ConfigError("aggregate_importance: need at least one instance");
    n = std::min(n, data.row_count());

    auto segments = c0_segments(model);
    const size_t L = model.cross.layers.size();
    std::vector<Vec> sums(L, Vec::Zero(static_cast<Eigen::Index>(segments.size())));

    std::vector<uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0u);
    const size_t chunk = 4096;
    ForwardCache cache;
    for (size_t begin = 0; begin < n; begin += chunk) {
        size_t end = std::min(n, begin + chunk);
        Batch batch = make_batch(data, ids, begin, end);
        model_forward(model, batch, /*training=*/false, 0, 0, cache);
        for (size_t l = 0; l < L; ++l) {
            const Mat& g = cache.cross.gate(l);
            for (Eigen::Index col = 0; col < g.cols(); ++col) {
                sums[l] += fieldwise_mean(g.col(col), segments);
            }
        }
    }
    for (auto& s : sums) s /= static_cast<double>(n);
    return sums;
}

double cosine_similarity(const Mat& A, const Mat& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
        throw DataError("cosine_similarity: shapes differ");
    }
    double na = A.norm();
    double nb = B.norm();
    if (na == 0.0 && nb == 0.0) throw NumericError("cosine_similarity: both matrices are zero");
    if (na == 0.0 || nb == 0.0) return 0.0;
    return A.cwiseProduct(B).sum() / (na * nb);
}

// ============================================================
// Pearson correlation with a Student-t significance tail
// ============================================================

namespace {

// Continued fraction for the incomplete beta, modified Lentz iteration.
double beta_cf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 1e-15;
    const double tiny = 1e-300;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta: a, b must be positive");
    if (x < 0.0 || x > 1.0) throw ConfigError("incomplete_beta: x must lie in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw DataError("pearson: need parallel lists of length at least 3");
    }
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: zero variance input");

    PearsonResult out;
    out.r = sxy / std::sqrt(sxx * syy);
    // Guard the boundary: rounding can push |r| a hair past 1.
    out.r = std::clamp(out.r, -1.0, 1.0);

    double df = static_cast<double>(n) - 2.0;
    double one_minus_r2 = (1.0 - out.r) * (1.0 + out.r);
    if (one_minus_r2 <= 0.0) {
        out.p_value = 0.0;
        return out;
    }
    double t2 = out.r * out.r * df / one_minus_r2;
    // Two-sided tail of Student-t with df degrees of freedom:
    // P(|T| ≥ t) = I_{df/(df+t²)}(df/2, 1/2).
    out.p_value = incomplete_beta(df / 2.0, 0.5, df / (df + t2));
    return out;
}

}  // namespace gdcn
