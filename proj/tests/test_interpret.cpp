#include <doctest.h>

#include <cmath>
#include <vector>

#include "gdcn/interpret.hpp"
#include "gdcn/model.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace gdcn;
using namespace gdcn::testing;

namespace {

Model small_model(const std::vector<uint32_t>& kept, const std::vector<int>& dims,
                  bool alignment, int layers, uint64_t seed) {
    DatasetSchema schema = make_categorical_schema(kept);
    ModelConfig config;
    config.variant = Variant::GcnOnly;
    config.cross_layers = layers;
    config.dnn_widths = {};
    config.dropout_rate = 0.0;
    config.dims = dims;
    config.use_alignment = alignment;
    return init_model(schema, config, seed);
}

EncodedDataset random_dataset(const DatasetSchema& schema, size_t rows, uint64_t seed) {
    Rng rng(seed);
    EncodedDataset data;
    data.field_count = static_cast<uint32_t>(schema.fields.size());
    for (size_t r = 0; r < rows; ++r) {
        EncodedInstance inst;
        for (const auto& field : schema.fields) {
            inst.indices.push_back(static_cast<uint32_t>(rng.bounded(field.size())));
        }
        inst.label = static_cast<uint8_t>(rng.bounded(2));
        data.append(inst);
    }
    return data;
}

}  // namespace

TEST_CASE("block_norms tiles the matrix exactly") {
    std::vector<int> dims = {2, 3};

    Mat zero = Mat::Zero(5, 5);
    Mat bz = block_norms(zero, dims);
    REQUIRE(bz.rows() == 2);
    REQUIRE(bz.cols() == 2);
    CHECK(bz.maxCoeff() == 0.0);

    Mat eye = Mat::Identity(5, 5);
    Mat be = block_norms(eye, dims);
    CHECK(be(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(be(1, 1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(be(0, 1) == 0.0);
    CHECK(be(1, 0) == 0.0);

    CHECK_THROWS_AS(block_norms(Mat::Zero(4, 4), dims), DataError);
    CHECK_THROWS_AS(block_norms(zero, std::vector<int>{0, 5}), ConfigError);
}

TEST_CASE("block_norms matches the naive oracle and conserves energy") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> dims;
        int D = 0;
        size_t F = 2 + rng.bounded(4);
        for (size_t f = 0; f < F; ++f) {
            dims.push_back(1 + static_cast<int>(rng.bounded(4)));
            D += dims.back();
        }
        Mat W(D, D);
        for (int r = 0; r < D; ++r) {
            for (int c = 0; c < D; ++c) W(r, c) = rng.uniform(-2.0, 2.0);
        }
        Mat got = block_norms(W, dims);
        Mat want = naive_block_norms(W, dims);
        REQUIRE((got - want).cwiseAbs().maxCoeff() <= 1e-13);

        // Squared block norms partition the squared Frobenius norm.
        double sum = got.array().square().sum();
        REQUIRE(sum == doctest::Approx(W.squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("gate_profile reports sigmoid gate activations") {
    Model model = small_model({1, 1}, {1, 1}, false, 1, 21);
    model.embeddings.tables[0](0, 0) = 0.3;
    model.embeddings.tables[1](1, 0) = -0.7;
    Mat W_g(2, 2);
    W_g << 0.5, -0.2, 0.1, 0.8;
    model.cross.layers[0].W_g = W_g;

    EncodedInstance inst;
    inst.indices = {0, 1};
    inst.label = 1;
    GateProfile profile = gate_profile(model, inst);
    REQUIRE(profile.bitwise.size() == 1);
    REQUIRE(profile.fieldwise.size() == 1);
    // Gate input for the first layer is c0 = (0.3, −0.7).
    CHECK(profile.bitwise[0](0) == doctest::Approx(sigmoid(0.29)).epsilon(1e-14));
    CHECK(profile.bitwise[0](1) == doctest::Approx(sigmoid(-0.53)).epsilon(1e-14));
    // One-bit fields: fieldwise equals bitwise.
    CHECK(profile.fieldwise[0] == profile.bitwise[0]);
}

TEST_CASE("zero gate weights profile to exactly one half") {
    Model model = small_model({3, 4, 2}, {2, 3, 2}, false, 2, 23);
    for (auto& layer : model.cross.layers) layer.W_g.setZero();

    EncodedInstance inst;
    inst.indices = {1, 3, 0};
    GateProfile profile = gate_profile(model, inst);
    for (const Vec& bits : profile.bitwise) {
        for (Eigen::Index i = 0; i < bits.size(); ++i) CHECK(bits(i) == 0.5);
    }
    for (const Vec& fw : profile.fieldwise) {
        REQUIRE(fw.size() == 3);
        for (Eigen::Index f = 0; f < fw.size(); ++f) CHECK(fw(f) == 0.5);
    }
}

TEST_CASE("fieldwise profile averages each field's bit segment") {
    for (bool alignment : {false, true}) {
        CAPTURE(alignment);
        Model model = small_model({3, 5}, {2, 3}, alignment, 2, 25);
        EncodedInstance inst;
        inst.indices = {2, 4};
        GateProfile profile = gate_profile(model, inst);

        int seg0 = alignment ? model.alignment.d_max : 2;
        int seg1 = alignment ? model.alignment.d_max : 3;
        for (size_t l = 0; l < profile.bitwise.size(); ++l) {
            const Vec& bits = profile.bitwise[l];
            REQUIRE(bits.size() == seg0 + seg1);
            CHECK(profile.fieldwise[l](0) == bits.segment(0, seg0).mean());
            CHECK(profile.fieldwise[l](1) == bits.segment(seg0, seg1).mean());
        }
    }
}

TEST_CASE("all-ones gates have no profile to report") {
    Model model = small_model({2, 2}, {1, 1}, false, 1, 27);
    model.config.gate_mode = GateMode::AllOnes;
    EncodedInstance inst;
    inst.indices = {0, 0};
    CHECK_THROWS_AS(gate_profile(model, inst), ConfigError);

    EncodedDataset data = random_dataset(make_categorical_schema({2, 2}), 4, 5);
    CHECK_THROWS_AS(aggregate_importance(model, data, 4), ConfigError);
}

TEST_CASE("aggregate_importance matches the per-instance mean") {
    DatasetSchema schema = make_categorical_schema({5, 3, 4});
    ModelConfig config;
    config.variant = Variant::Parallel;
    config.cross_layers = 2;
    config.dnn_widths = {5};
    config.dropout_rate = 0.0;
    config.dims = {2, 3, 2};
    Model model = init_model(schema, config, 301);
    EncodedDataset data = random_dataset(schema, 40, 303);

    const size_t n = 25;
    std::vector<Vec> got = aggregate_importance(model, data, n);
    REQUIRE(got.size() == 2);

    // Two-pass oracle: one forward per instance, mean of fieldwise means.
    std::vector<Vec> want(2, Vec::Zero(3));
    for (size_t i = 0; i < n; ++i) {
        GateProfile profile = gate_profile(model, data.instance(i));
        for (size_t l = 0; l < 2; ++l) want[l] += profile.fieldwise[l];
    }
    for (size_t l = 0; l < 2; ++l) {
        want[l] /= static_cast<double>(n);
        REQUIRE((got[l] - want[l]).cwiseAbs().maxCoeff() <= 1e-12);
        for (Eigen::Index f = 0; f < got[l].size(); ++f) {
            REQUIRE(got[l](f) > 0.0);
            REQUIRE(got[l](f) < 1.0);
        }
    }

    // A single instance reduces to its own profile.
    std::vector<Vec> one = aggregate_importance(model, data, 1);
    GateProfile first = gate_profile(model, data.instance(0));
    for (size_t l = 0; l < 2; ++l) {
        REQUIRE((one[l] - first.fieldwise[l]).cwiseAbs().maxCoeff() <= 1e-12);
    }

    // Requests beyond the dataset clamp to every row.
    std::vector<Vec> all = aggregate_importance(model, data, 10000);
    std::vector<Vec> exact = aggregate_importance(model, data, data.row_count());
    for (size_t l = 0; l < 2; ++l) CHECK(all[l] == exact[l]);

    CHECK_THROWS_AS(aggregate_importance(model, data, 0), ConfigError);
    EncodedDataset empty;
    empty.field_count = 3;
    CHECK_THROWS_AS(aggregate_importance(model, empty, 1), DataError);
}

TEST_CASE("cosine_similarity endpoints and formula") {
    Rng rng(93);
    Mat A(3, 4);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) A(r, c) = rng.uniform(-1.0, 1.0);
    }
    CHECK(cosine_similarity(A, A) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(A, Mat(-A)) == doctest::Approx(-1.0).epsilon(1e-12));

    Mat B(3, 4);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) B(r, c) = rng.uniform(-1.0, 1.0);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            dot += A(r, c) * B(r, c);
            na += A(r, c) * A(r, c);
            nb += B(r, c) * B(r, c);
        }
    }
    CHECK(cosine_similarity(A, B) ==
          doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-12));

    CHECK(cosine_similarity(Mat::Zero(3, 4), B) == 0.0);
    CHECK_THROWS_AS(cosine_similarity(A, Mat::Zero(4, 3)), DataError);
    CHECK_THROWS_AS(cosine_similarity(Mat::Zero(2, 2), Mat::Zero(2, 2)), NumericError);
}

TEST_CASE("pearson on exact linear and exactly uncorrelated data") {
    std::vector<double> x = {1, 2, 3, 4, 5, 6};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v + 1.0);
    PearsonResult lin = pearson(x, y);
    CHECK(lin.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lin.p_value <= 1e-10);

    // Symmetric x against x²: the sample covariance is exactly zero.
    std::vector<double> xs = {-2, -1, 0, 1, 2};
    std::vector<double> ys = {4, 1, 0, 1, 4};
    PearsonResult flat = pearson(xs, ys);
    CHECK(flat.r == 0.0);
    CHECK(flat.p_value == 1.0);

    CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), DataError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), DataError);
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), NumericError);
}

TEST_CASE("pearson agrees with an independent high-precision reference") {
    // Reference values computed once with 40-digit arithmetic.
    std::vector<double> x = {0.2, 1.7, -0.4, 3.1, 2.2, -1.5, 0.9, 2.8, -0.7, 1.1};
    std::vector<double> y = {1.0, 2.3, 0.1, 2.9, 1.8, -0.8, 1.4, 3.3, -0.2, 0.7};
    PearsonResult got = pearson(x, y);
    CHECK(got.r == doctest::Approx(0.9581742055405112).epsilon(1e-12));
    CHECK(got.p_value == doctest::Approx(1.2728831393651612e-05).epsilon(1e-9));
}

TEST_CASE("incomplete_beta closed forms and spot values") {
    for (double x : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-13));
    }
    CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);

    // Polynomial cases evaluate exactly in rationals.
    CHECK(incomplete_beta(4.0, 2.0, 0.7) == doctest::Approx(0.52822).epsilon(1e-12));
    CHECK(incomplete_beta(3.0, 7.0, 0.25) == doctest::Approx(0.399322509765625).epsilon(1e-12));
    // Remaining references from 40-digit arithmetic.
    CHECK(incomplete_beta(2.5, 1.5, 0.3) == doctest::Approx(0.08894372317066559).epsilon(1e-12));
    CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(incomplete_beta(8.0, 2.0, 0.9) == doctest::Approx(0.774840978).epsilon(1e-12));

    CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), ConfigError);
    CHECK_THROWS_AS(incomplete_beta(1.0, -2.0, 0.5), ConfigError);
    CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), ConfigError);
}

TEST_CASE("incomplete_beta symmetry and monotonicity") {
    Rng rng(95);
    for (int trial = 0; trial < 50; ++trial) {
        double a = 0.3 + 5.0 * rng.u01();
        double b = 0.3 + 5.0 * rng.u01();
        double x = rng.u01();
        double lhs = incomplete_beta(a, b, x);
        double rhs = 1.0 - incomplete_beta(b, a, 1.0 - x);
        REQUIRE(lhs >= 0.0);
        REQUIRE(lhs <= 1.0);
        REQUIRE(lhs == doctest::Approx(rhs).epsilon(1e-11));
    }
    double prev = 0.0;
    for (double x = 0.05; x < 1.0; x += 0.05) {
        double v = incomplete_beta(2.5, 4.0, x);
        REQUIRE(v >= prev);
        prev = v;
    }
}
