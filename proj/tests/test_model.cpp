#include <doctest.h>

#include <cmath>
#include <vector>

#include "gdcn/model.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace gdcn;
using namespace gdcn::testing;

namespace {

Batch random_batch(const DatasetSchema& schema, size_t n, uint64_t seed) {
    Batch batch;
    batch.field_count = static_cast<uint32_t>(schema.field_count());
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        batch.labels.push_back(rng.u01() < 0.5 ? 1 : 0);
        for (const auto& f : schema.fields) {
            batch.indices.push_back(static_cast<uint32_t>(rng.bounded(f.size())));
        }
    }
    return batch;
}

}  // namespace

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::GcnOnly, Variant::Stacked, Variant::Parallel}) {
        CHECK(variant_from_name(variant_name(v)) == v);
    }
    CHECK(variant_name(Variant::GcnOnly) == "gcn");
    CHECK(variant_name(Variant::Stacked) == "gdcn-s");
    CHECK(variant_name(Variant::Parallel) == "gdcn-p");
    CHECK_THROWS_AS(variant_from_name("dcn"), ConfigError);
}

TEST_CASE("init_model widths and parameter accounting") {
    DatasetSchema schema = make_categorical_schema({3, 4});

    ModelConfig cfg;
    cfg.variant = Variant::Parallel;
    cfg.cross_layers = 2;
    cfg.dnn_widths = {10, 6};
    Model m = init_model(schema, cfg, 5);

    // Empty dims default to a uniform 16.
    CHECK(m.embeddings.dims == std::vector<int>{16, 16});
    CHECK(m.input_width() == 32);
    CHECK(m.dnn_output_width() == 6);
    CHECK(m.head_width() == 38);
    CHECK(m.head_w.size() == 38);
    CHECK(m.schema_digest == schema.digest());
    CHECK(m.field_sizes == schema.field_sizes());

    uint64_t expected = (4ull + 5ull) * 16;                  // embeddings
    expected += 2ull * (2 * 32ull * 32 + 32);                // two cross layers
    expected += 10ull * 32 + 10 + 6ull * 10 + 6;             // dnn
    expected += 38;                                          // head
    CHECK(m.param_count() == expected);

    ModelConfig gcn_cfg;
    gcn_cfg.variant = Variant::GcnOnly;
    gcn_cfg.cross_layers = 1;
    gcn_cfg.dims = {2, 3};
    Model gcn = init_model(schema, gcn_cfg, 5);
    CHECK(gcn.input_width() == 5);
    CHECK(gcn.head_width() == 5);
    CHECK(gcn.mlp.layers.empty());

    ModelConfig stacked_cfg;
    stacked_cfg.variant = Variant::Stacked;
    stacked_cfg.cross_layers = 1;
    stacked_cfg.dims = {2, 3};
    stacked_cfg.dnn_widths = {7};
    Model stacked = init_model(schema, stacked_cfg, 5);
    CHECK(stacked.head_width() == 7);

    ModelConfig aligned_cfg = stacked_cfg;
    aligned_cfg.use_alignment = true;
    Model aligned = init_model(schema, aligned_cfg, 5);
    CHECK(aligned.alignment.d_max == 3);
    CHECK(aligned.input_width() == 6);  // F * d_max
}

TEST_CASE("init_model validates its configuration") {
    DatasetSchema schema = make_categorical_schema({3, 4});
    ModelConfig cfg;
    cfg.dims = {2};  // wrong field count
    CHECK_THROWS_AS(init_model(schema, cfg, 1), ConfigError);

    ModelConfig neg;
    neg.cross_layers = -1;
    CHECK_THROWS_AS(init_model(schema, neg, 1), ConfigError);

    ModelConfig bad_drop;
    bad_drop.dropout_rate = 1.0;
    CHECK_THROWS_AS(init_model(schema, bad_drop, 1), ConfigError);
}

TEST_CASE("zero head gives one half everywhere") {
    DatasetSchema schema = make_categorical_schema({3, 4});
    ModelConfig cfg;
    cfg.dims = {2, 2};
    cfg.dnn_widths = {4};
    Model m = init_model(schema, cfg, 9);
    m.head_w.setZero();

    Batch batch = random_batch(schema, 6, 10);
    ForwardCache cache;
    Vec yhat = model_forward(m, batch, false, 0, 0, cache);
    for (Eigen::Index i = 0; i < yhat.size(); ++i) CHECK(yhat(i) == 0.5);
}

TEST_CASE("degenerate parallel model concatenates c0 with itself") {
    DatasetSchema schema = make_categorical_schema({3, 4});
    ModelConfig cfg;
    cfg.variant = Variant::Parallel;
    cfg.cross_layers = 0;
    cfg.dnn_widths = {};
    cfg.dims = {2, 2};
    cfg.dropout_rate = 0.0;
    Model m = init_model(schema, cfg, 13);

    Batch batch = random_batch(schema, 4, 14);
    ForwardCache cache;
    Vec yhat = model_forward(m, batch, false, 0, 0, cache);

    EmbeddingTables& t = m.embeddings;
    for (size_t i = 0; i < batch.size(); ++i) {
        Vec c0(4);
        c0 << t.tables[0](batch.row(i)[0], 0), t.tables[0](batch.row(i)[0], 1),
            t.tables[1](batch.row(i)[1], 0), t.tables[1](batch.row(i)[1], 1);
        Vec both(8);
        both << c0, c0;
        double logit = m.head_w.dot(both);
        CHECK(yhat(i) == doctest::Approx(sigmoid(logit)).epsilon(1e-14));
    }
}

TEST_CASE("forward equals a hand-composed pipeline for every variant") {
    DatasetSchema schema = make_categorical_schema({5, 3, 7});
    for (Variant variant : {Variant::GcnOnly, Variant::Stacked, Variant::Parallel}) {
        CAPTURE(variant_name(variant));
        ModelConfig cfg;
        cfg.variant = variant;
        cfg.cross_layers = 2;
        cfg.dnn_widths = {6, 4};
        cfg.dims = {2, 3, 2};
        cfg.dropout_rate = 0.0;
        Model m = init_model(schema, cfg, 21);

        Batch batch = random_batch(schema, 5, 22);
        ForwardCache cache;
        Vec yhat = model_forward(m, batch, false, 0, 0, cache);

        Mat c0 = lookup_concat_batch(batch, m.embeddings);
        CrossStackCache cross_cache;
        Mat cross_out = stack_forward(c0, m.cross, cross_cache);
        MlpCache mlp_cache;
        Mat final;
        if (variant == Variant::GcnOnly) {
            final = cross_out;
        } else if (variant == Variant::Stacked) {
            final = mlp_forward(cross_out, m.mlp, false, 0, 0, mlp_cache);
        } else {
            Mat deep = mlp_forward(c0, m.mlp, false, 0, 0, mlp_cache);
            final.resize(cross_out.rows() + deep.rows(), cross_out.cols());
            final << cross_out, deep;
        }
        for (size_t i = 0; i < batch.size(); ++i) {
            double logit = m.head_w.dot(final.col(i));
            logit = std::clamp(logit, -kLogitClamp, kLogitClamp);
            REQUIRE(yhat(i) == doctest::Approx(sigmoid(logit)).epsilon(1e-14));
        }
    }
}

TEST_CASE("logit clamp keeps saturated models finite") {
    DatasetSchema schema = make_categorical_schema({3, 4});
    ModelConfig cfg;
    cfg.dims = {2, 2};
    cfg.dnn_widths = {};
    cfg.cross_layers = 0;
    Model m = init_model(schema, cfg, 31);
    m.head_w.setConstant(1e9);

    Batch batch = random_batch(schema, 8, 32);
    ForwardCache cache;
    Vec yhat = model_forward(m, batch, false, 0, 0, cache);
    for (Eigen::Index i = 0; i < yhat.size(); ++i) {
        CHECK(std::isfinite(yhat(i)));
        CHECK(std::abs(cache.logits(i)) <= kLogitClamp);
    }
    Vec grad;
    CHECK(std::isfinite(batch_logloss(yhat, batch.labels, &grad)));
}

TEST_CASE("logloss anchors and domain checks") {
    CHECK(logloss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logloss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logloss(1.0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(logloss(0.0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    // The clamp stores 1 - 1e-15 as a double first, so 1 - yhat is the
    // round-trip residual (~9.99e-16), not 1e-15 itself.
    CHECK(logloss(1.0, 0) == doctest::Approx(-std::log(1.0 - (1.0 - 1e-15))).epsilon(1e-12));
    CHECK_THROWS_AS(logloss(1.5, 1), NumericError);
    CHECK_THROWS_AS(logloss(-0.1, 0), NumericError);
    CHECK_THROWS_AS(logloss(std::nan(""), 1), NumericError);
}

TEST_CASE("batch_logloss mean and logit gradient") {
    Vec yhat(4);
    yhat << 0.5, 0.9, 0.2, 0.7;
    std::vector<uint8_t> labels = {1, 1, 0, 0};
    Vec grad;
    double loss = batch_logloss(yhat, labels, &grad);

    double expected = (logloss(0.5, 1) + logloss(0.9, 1) + logloss(0.2, 0) + logloss(0.7, 0)) / 4;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-14));

    REQUIRE(grad.size() == 4);
    CHECK(grad(0) == doctest::Approx((0.5 - 1.0) / 4).epsilon(1e-14));
    CHECK(grad(1) == doctest::Approx((0.9 - 1.0) / 4).epsilon(1e-14));
    CHECK(grad(2) == doctest::Approx((0.2 - 0.0) / 4).epsilon(1e-14));
    CHECK(grad(3) == doctest::Approx((0.7 - 0.0) / 4).epsilon(1e-14));
}

TEST_CASE("model backward matches finite differences everywhere") {
    DatasetSchema schema = make_categorical_schema({3, 4, 2});

    struct Scenario {
        Variant variant;
        GateMode gate;
        bool align;
        double dropout;
    };
    for (const Scenario& sc : {Scenario{Variant::Parallel, GateMode::Learned, false, 0.4},
                               Scenario{Variant::Stacked, GateMode::Learned, true, 0.0},
                               Scenario{Variant::GcnOnly, GateMode::AllOnes, false, 0.0}}) {
        CAPTURE(variant_name(sc.variant));
        ModelConfig cfg;
        cfg.variant = sc.variant;
        cfg.cross_layers = 2;
        cfg.dnn_widths = sc.variant == Variant::GcnOnly ? std::vector<int>{}
                                                        : std::vector<int>{5};
        cfg.gate_mode = sc.gate;
        cfg.dims = {2, 3, 2};
        cfg.dropout_rate = sc.dropout;
        cfg.use_alignment = sc.align;
        Model m = init_model(schema, cfg, 41);

        Batch batch = random_batch(schema, 6, 42);
        const uint64_t seed = 7, step = 2;

        auto loss = [&]() {
            ForwardCache cache;
            Vec yhat = model_forward(m, batch, true, seed, step, cache);
            return batch_logloss(yhat, batch.labels, nullptr);
        };

        ForwardCache cache;
        Vec yhat = model_forward(m, batch, true, seed, step, cache);
        Vec grad_logit;
        batch_logloss(yhat, batch.labels, &grad_logit);
        ModelGrads grads;
        model_backward(m, batch, cache, grad_logit, grads);

        auto check_block = [&](const double* analytic, double* params, size_t n) {
            auto numeric = finite_diff_grad(loss, params, n);
            for (size_t i = 0; i < n; ++i) REQUIRE(grad_close(analytic[i], numeric[i]));
        };

        // Embedding tables: absent accumulator rows mean zero gradient.
        for (int f = 0; f < schema.field_count(); ++f) {
            RowMat& table = m.embeddings.tables[f];
            auto numeric =
                finite_diff_grad(loss, table.data(), static_cast<size_t>(table.size()));
            for (Eigen::Index row = 0; row < table.rows(); ++row) {
                for (Eigen::Index col = 0; col < table.cols(); ++col) {
                    double analytic = 0.0;
                    auto it = grads.embeddings.rows[f].find(static_cast<uint32_t>(row));
                    if (it != grads.embeddings.rows[f].end()) analytic = it->second(col);
                    REQUIRE(grad_close(analytic,
                                       numeric[static_cast<size_t>(row * table.cols() + col)]));
                }
            }
        }
        if (sc.align) {
            for (int f = 0; f < schema.field_count(); ++f) {
                check_block(grads.alignment[f].data(), m.alignment.matrices[f].data(),
                            static_cast<size_t>(m.alignment.matrices[f].size()));
            }
        }
        for (int l = 0; l < cfg.cross_layers; ++l) {
            check_block(grads.cross[l].grad_W_c.data(), m.cross.layers[l].W_c.data(),
                        static_cast<size_t>(m.cross.layers[l].W_c.size()));
            check_block(grads.cross[l].grad_W_g.data(), m.cross.layers[l].W_g.data(),
                        static_cast<size_t>(m.cross.layers[l].W_g.size()));
            check_block(grads.cross[l].grad_b.data(), m.cross.layers[l].b.data(),
                        static_cast<size_t>(m.cross.layers[l].b.size()));
        }
        for (size_t l = 0; l < m.mlp.layers.size(); ++l) {
            check_block(grads.mlp.grad_W[l].data(), m.mlp.layers[l].W.data(),
                        static_cast<size_t>(m.mlp.layers[l].W.size()));
            check_block(grads.mlp.grad_b[l].data(), m.mlp.layers[l].b.data(),
                        static_cast<size_t>(m.mlp.layers[l].b.size()));
        }
        check_block(grads.head_w.data(), m.head_w.data(), static_cast<size_t>(m.head_w.size()));
    }
}
