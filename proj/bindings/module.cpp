#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gdcn/crossnet.hpp"
#include "gdcn/features.hpp"
#include "gdcn/fdo.hpp"
#include "gdcn/interpret.hpp"
#include "gdcn/metrics.hpp"
#include "gdcn/model.hpp"
#include "gdcn/runner.hpp"

namespace py = pybind11;
using namespace gdcn;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gated cross network CTR models with embedding dimension planning";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    // ---- feature pipeline ----
    m.def("discretize_numeric", &discretize_numeric, py::arg("z"),
          "Numeric-field token: floor(log2(z)) above 2, floor(z) otherwise.");

    // ---- metrics ----
    m.def("auc", &auc, py::arg("scores"), py::arg("labels"),
          "Rank-statistic AUC; exactly equals the pairwise definition.");
    m.def("mean_logloss", &mean_logloss, py::arg("predictions"), py::arg("labels"));
    m.def("logloss", &logloss, py::arg("yhat"), py::arg("y"));

    // ---- cross layer ----
    m.def(
        "gated_cross_forward",
        [](const Mat& c0, const Mat& c_l, const Mat& W_c, const Mat& W_g, const Vec& b,
           bool gated) {
            GatedCrossParams p;
            p.W_c = W_c;
            p.W_g = W_g;
            p.b = b;
            CrossLayerCache cache;
            return gated_cross_forward(c0, c_l, p, gated ? GateMode::Learned : GateMode::AllOnes,
                                       cache);
        },
        py::arg("c0"), py::arg("c_l"), py::arg("W_c"), py::arg("W_g"), py::arg("b"),
        py::arg("gated") = true,
        "One layer c0 * (W_c c_l + b) * sigmoid(W_g c_l) + c_l on D x B "
        "column batches; gated=False fixes the sigmoid factor at 1.");

    // ---- dimension planning ----
    m.def(
        "singular_values",
        [](const RowMat& table, bool center) {
            FdoOptions o;
            o.center = center;
            return singular_values(table, o);
        },
        py::arg("table"), py::arg("center") = true,
        "Descending singular values of the (optionally column-centered) table.");
    m.def(
        "choose_dim",
        [](const std::vector<double>& sv, double ratio, bool squared_energy) {
            FdoOptions o;
            o.squared_energy = squared_energy;
            return choose_dim(sv, ratio, o);
        },
        py::arg("singular_values"), py::arg("ratio"), py::arg("squared_energy") = true,
        "Smallest k whose leading energy fraction reaches ratio.");
    m.def("formula_dims", &formula_dims, py::arg("field_sizes"),
          "Rule-of-thumb dims: round(size^(1/4)), at least 1.");

    py::class_<ParamSummary>(m, "ParamSummary")
        .def_readonly("P_e", &ParamSummary::P_e)
        .def_readonly("D_bar", &ParamSummary::D_bar)
        .def_readonly("K_bar", &ParamSummary::K_bar);
    m.def("param_count", &param_count, py::arg("field_sizes"), py::arg("dims"),
          "Embedding parameter total with its size-weighted and plain mean dims.");

    // ---- interpretation ----
    m.def("block_norms", &block_norms, py::arg("W_c"), py::arg("dims"),
          "Frobenius norm of every field-pair block of a cross weight matrix.");
    m.def("cosine_similarity", &cosine_similarity, py::arg("A"), py::arg("B"));

    py::class_<PearsonResult>(m, "PearsonResult")
        .def_readonly("r", &PearsonResult::r)
        .def_readonly("p_value", &PearsonResult::p_value);
    m.def("pearson", &pearson, py::arg("x"), py::arg("y"),
          "Correlation with a two-sided Student-t significance.");
    m.def("incomplete_beta", &incomplete_beta, py::arg("a"), py::arg("b"), py::arg("x"));

    // ---- pipeline commands (mirror the CLI subcommands) ----
    py::enum_<Monitor>(m, "Monitor")
        .value("auc", Monitor::ValidationAUC)
        .value("logloss", Monitor::ValidationLogLoss);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("monitor", &TrainConfig::monitor)
        .def_readwrite("wall_timing", &TrainConfig::wall_timing);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("auc", &EvalResult::auc)
        .def_readonly("logloss", &EvalResult::logloss)
        .def_readonly("n", &EvalResult::n);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("epoch_log", &TrainResult::epoch_log)
        .def_readonly("best_epoch", &TrainResult::best_epoch)
        .def_readonly("stopped_early", &TrainResult::stopped_early)
        .def_readonly("diverged", &TrainResult::diverged);

    py::class_<PrepOptions>(m, "PrepOptions")
        .def(py::init<>())
        .def_readwrite("data_path", &PrepOptions::data_path)
        .def_readwrite("fields_path", &PrepOptions::fields_path)
        .def_readwrite("out_dir", &PrepOptions::out_dir)
        .def_readwrite("threshold", &PrepOptions::threshold)
        .def_readwrite("ratios", &PrepOptions::ratios)
        .def_readwrite("seed", &PrepOptions::seed);
    py::class_<PrepResult>(m, "PrepResult")
        .def_readonly("schema_path", &PrepResult::schema_path)
        .def_readonly("train_path", &PrepResult::train_path)
        .def_readonly("val_path", &PrepResult::val_path)
        .def_readonly("test_path", &PrepResult::test_path)
        .def_readonly("n_train", &PrepResult::n_train)
        .def_readonly("n_val", &PrepResult::n_val)
        .def_readonly("n_test", &PrepResult::n_test)
        .def_readonly("total_features", &PrepResult::total_features)
        .def_readonly("schema_digest", &PrepResult::schema_digest);
    m.def("run_prep", &run_prep, py::arg("options"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<TrainOptions>(m, "TrainOptions")
        .def(py::init<>())
        .def_readwrite("train_path", &TrainOptions::train_path)
        .def_readwrite("val_path", &TrainOptions::val_path)
        .def_readwrite("schema_path", &TrainOptions::schema_path)
        .def_readwrite("out_dir", &TrainOptions::out_dir)
        .def_readwrite("dims_path", &TrainOptions::dims_path)
        .def_readwrite("variant", &TrainOptions::variant)
        .def_readwrite("cross_layers", &TrainOptions::cross_layers)
        .def_readwrite("dnn_widths", &TrainOptions::dnn_widths)
        .def_readwrite("gate_on", &TrainOptions::gate_on)
        .def_readwrite("use_alignment", &TrainOptions::use_alignment)
        .def_readwrite("dropout", &TrainOptions::dropout)
        .def_readwrite("embed_dim", &TrainOptions::embed_dim)
        // reference_internal so opts.train.max_epochs = n edits in place
        // instead of mutating a temporary copy.
        .def_property(
            "train", [](TrainOptions& o) -> TrainConfig& { return o.train; },
            [](TrainOptions& o, const TrainConfig& c) { o.train = c; },
            py::return_value_policy::reference_internal);
    py::class_<TrainOutput>(m, "TrainOutput")
        .def_readonly("checkpoint_path", &TrainOutput::checkpoint_path)
        .def_readonly("log_path", &TrainOutput::log_path)
        .def_readonly("result", &TrainOutput::result)
        .def_readonly("best_val", &TrainOutput::best_val);
    m.def("run_train", &run_train, py::arg("options"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<FdoOptions>(m, "FdoOptions")
        .def(py::init<>())
        .def_readwrite("center", &FdoOptions::center)
        .def_readwrite("squared_energy", &FdoOptions::squared_energy);
    py::class_<FdoFieldPlan>(m, "FdoFieldPlan")
        .def_readonly("field", &FdoFieldPlan::field)
        .def_readonly("dim", &FdoFieldPlan::dim)
        .def_readonly("singular_values", &FdoFieldPlan::singular_values);
    py::class_<FdoRatioPlan>(m, "FdoRatioPlan")
        .def_readonly("ratio", &FdoRatioPlan::ratio)
        .def_readonly("fields", &FdoRatioPlan::fields)
        .def_readonly("summary", &FdoRatioPlan::summary);
    py::class_<FdoReport>(m, "FdoReport")
        .def_readonly("source_checkpoint", &FdoReport::source_checkpoint)
        .def_readonly("plans", &FdoReport::plans);
    py::class_<FdoRunOptions>(m, "FdoRunOptions")
        .def(py::init<>())
        .def_readwrite("checkpoint_path", &FdoRunOptions::checkpoint_path)
        .def_readwrite("out_dir", &FdoRunOptions::out_dir)
        .def_readwrite("ratios", &FdoRunOptions::ratios)
        .def_property(
            "analysis", [](FdoRunOptions& o) -> FdoOptions& { return o.analysis; },
            [](FdoRunOptions& o, const FdoOptions& a) { o.analysis = a; },
            py::return_value_policy::reference_internal);
    py::class_<FdoOutput>(m, "FdoOutput")
        .def_readonly("report_path", &FdoOutput::report_path)
        .def_readonly("dims_paths", &FdoOutput::dims_paths)
        .def_readonly("report", &FdoOutput::report);
    m.def("run_fdo", &run_fdo, py::arg("options"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<EvalOptions>(m, "EvalOptions")
        .def(py::init<>())
        .def_readwrite("checkpoint_path", &EvalOptions::checkpoint_path)
        .def_readwrite("data_path", &EvalOptions::data_path)
        .def_readwrite("schema_path", &EvalOptions::schema_path)
        .def_readwrite("batch_size", &EvalOptions::batch_size)
        .def_readwrite("out_path", &EvalOptions::out_path);
    py::class_<EvalOutput>(m, "EvalOutput")
        .def_readonly("metrics", &EvalOutput::metrics)
        .def_readonly("json_text", &EvalOutput::json_text);
    m.def("run_eval", &run_eval, py::arg("options"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<ExplainOptions>(m, "ExplainOptions")
        .def(py::init<>())
        .def_readwrite("checkpoint_path", &ExplainOptions::checkpoint_path)
        .def_readwrite("data_path", &ExplainOptions::data_path)
        .def_readwrite("out_dir", &ExplainOptions::out_dir)
        .def_readwrite("instances", &ExplainOptions::instances)
        .def_readwrite("importance_n", &ExplainOptions::importance_n)
        .def_readwrite("ratio", &ExplainOptions::ratio)
        .def_readwrite("compare_checkpoint", &ExplainOptions::compare_checkpoint);
    py::class_<ExplainOutput>(m, "ExplainOutput")
        .def_readonly("files", &ExplainOutput::files)
        .def_readonly("dims_vs_importance", &ExplainOutput::dims_vs_importance)
        .def_readonly("cosine", &ExplainOutput::cosine);
    m.def("run_explain", &run_explain, py::arg("options"),
          py::call_guard<py::gil_scoped_release>());
}
