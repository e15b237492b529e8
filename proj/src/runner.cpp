#include "gdcn/runner.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gdcn/checkpoint.hpp"

namespace gdcn {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("output directory not set");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("failed writing " + path);
}

// Round-trippable, locale-independent float text for CSV cells.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

EncodedDataset subset(const EncodedDataset& data, const std::vector<uint32_t>& ids) {
    EncodedDataset out;
    out.field_count = data.field_count;
    out.labels.reserve(ids.size());
    out.indices.reserve(ids.size() * data.field_count);
    for (uint32_t r : ids) {
        out.labels.push_back(data.labels[r]);
        const uint32_t* src = data.row(r);
        out.indices.insert(out.indices.end(), src, src + data.field_count);
    }
    return out;
}

void check_schema_digest(const Model& model, const DatasetSchema& schema,
                         const std::string& what) {
    if (model.schema_digest != schema.digest()) {
        throw DataError(what + ": schema digest " + schema.digest() +
                        " does not match the checkpoint's " + model.schema_digest);
    }
}

}  // namespace

PrepResult run_prep(const PrepOptions& options) {
    auto decls = load_field_decls(options.fields_path);
    RawDataset raw = load_csv(options.data_path, decls);
    if (raw.rows.empty()) throw DataError(options.data_path + ": no data rows");

    DatasetSchema schema = build_schema(raw.rows, decls, options.threshold);
    EncodedDataset encoded = encode_dataset(raw.rows, schema);
    SplitIndices split = split_dataset(raw.rows.size(), options.ratios, options.seed);

    ensure_dir(options.out_dir);
    PrepResult result;
    result.schema_path = join(options.out_dir, "schema.json");
    result.train_path = join(options.out_dir, "train.bin");
    result.val_path = join(options.out_dir, "val.bin");
    result.test_path = join(options.out_dir, "test.bin");

    schema.save(result.schema_path);
    write_encoded(result.train_path, subset(encoded, split.train));
    write_encoded(result.val_path, subset(encoded, split.validation));
    write_encoded(result.test_path, subset(encoded, split.test));

    result.n_train = split.train.size();
    result.n_val = split.validation.size();
    result.n_test = split.test.size();
    result.total_features = schema.total_features();
    result.schema_digest = schema.digest();
    return result;
}

TrainOutput run_train(const TrainOptions& options) {
    DatasetSchema schema = DatasetSchema::load(options.schema_path);
    EncodedDataset train_data = read_encoded(options.train_path);
    EncodedDataset val_data = read_encoded(options.val_path);
    if (train_data.field_count != schema.fields.size() ||
        val_data.field_count != schema.fields.size()) {
        throw DataError("train: encoded data field count does not match the schema");
    }

    ModelConfig config;
    config.variant = variant_from_name(options.variant);
    config.cross_layers = options.cross_layers;
    config.dnn_widths = options.dnn_widths;
    config.gate_mode = options.gate_on ? GateMode::Learned : GateMode::AllOnes;
    config.dropout_rate = options.dropout;
    config.use_alignment = options.use_alignment;
    if (!options.dims_path.empty()) {
        config.dims = load_dims_file(options.dims_path);
        if (config.dims.size() != schema.fields.size()) {
            throw ConfigError("dims file has " + std::to_string(config.dims.size()) +
                              " fields, schema has " + std::to_string(schema.fields.size()));
        }
    } else {
        if (options.embed_dim < 1) throw ConfigError("embedding dimension must be positive");
        config.dims.assign(schema.fields.size(), options.embed_dim);
    }

    Model model = init_model(schema, config, options.train.seed);
    TrainOutput out;
    out.result = train(model, train_data, val_data, options.train);

    ensure_dir(options.out_dir);
    out.checkpoint_path = join(options.out_dir, "checkpoint.bin");
    out.log_path = join(options.out_dir, "epochs.jsonl");
    save_checkpoint(out.checkpoint_path, model);
    std::string log_text;
    for (const auto& line : out.result.epoch_log) log_text += line + "\n";
    write_text(out.log_path, log_text);

    if (!out.result.epoch_log.empty()) out.best_val = evaluate(model, val_data, options.train.batch_size);
    return out;
}

FdoOutput run_fdo(const FdoRunOptions& options) {
    Model model = load_checkpoint(options.checkpoint_path);
    std::string digest = file_digest(options.checkpoint_path);

    FdoOutput out;
    out.report = fdo_plan(model.embeddings, model.field_sizes, options.ratios, options.analysis);
    out.report.source_checkpoint = digest;

    ensure_dir(options.out_dir);
    json report_doc;
    report_doc["source_checkpoint"] = digest;
    json plans = json::array();
    for (const auto& plan : out.report.plans) {
        json jp;
        jp["ratio"] = plan.ratio;
        std::vector<int> dims;
        for (const auto& f : plan.fields) dims.push_back(f.dim);
        jp["dims"] = dims;
        jp["embedding_params"] = plan.summary.P_e;
        jp["weighted_avg_dim"] = plan.summary.D_bar;
        jp["avg_dim"] = plan.summary.K_bar;
        plans.push_back(std::move(jp));

        char name[64];
        std::snprintf(name, sizeof(name), "dims_%g.json", plan.ratio);
        std::string dims_path = join(options.out_dir, name);
        write_text(dims_path, dims_file_text(plan, digest));
        out.dims_paths.push_back(dims_path);
    }
    report_doc["plans"] = std::move(plans);
    out.report_path = join(options.out_dir, "fdo_report.json");
    write_text(out.report_path, report_doc.dump(2) + "\n");
    return out;
}

EvalOutput run_eval(const EvalOptions& options) {
    Model model = load_checkpoint(options.checkpoint_path);
    DatasetSchema schema = DatasetSchema::load(options.schema_path);
    check_schema_digest(model, schema, "eval");
    EncodedDataset data = read_encoded(options.data_path);
    if (data.field_count != schema.fields.size()) {
        throw DataError("eval: encoded data field count does not match the schema");
    }

    EvalOutput out;
    out.metrics = evaluate(model, data, options.batch_size);
    json doc;
    doc["auc"] = out.metrics.auc;
    doc["logloss"] = out.metrics.logloss;
    doc["n"] = out.metrics.n;
    out.json_text = doc.dump(2) + "\n";
    if (!options.out_path.empty()) write_text(options.out_path, out.json_text);
    return out;
}

ExplainOutput run_explain(const ExplainOptions& options) {
    Model model = load_checkpoint(options.checkpoint_path);
    EncodedDataset data = read_encoded(options.data_path);
    if (data.field_count != model.field_sizes.size()) {
        throw DataError("explain: encoded data field count does not match the checkpoint");
    }
    if (model.cross.layers.empty()) {
        throw ConfigError("explain: the checkpoint has no cross layers to interpret");
    }

    ensure_dir(options.out_dir);
    ExplainOutput out;
    const std::vector<int> dims =
        model.config.use_alignment
            ? std::vector<int>(model.config.dims.size(), model.alignment.d_max)
            : model.config.dims;
    const size_t F = dims.size();

    // Static report: block norms of every cross layer, 1-based file names.
    for (size_t l = 0; l < model.cross.layers.size(); ++l) {
        Mat norms = block_norms(model.cross.layers[l].W_c, dims);
        std::string text;
        for (Eigen::Index i = 0; i < norms.rows(); ++i) {
            for (Eigen::Index j = 0; j < norms.cols(); ++j) {
                if (j) text += ",";
                text += fmt(norms(i, j));
            }
            text += "\n";
        }
        std::string path =
            join(options.out_dir, "block_norms_layer" + std::to_string(l + 1) + ".csv");
        write_text(path, text);
        out.files.push_back(path);
    }

    // Dynamic report: per-instance gate profiles.
    for (uint32_t id : options.instances) {
        if (id >= data.row_count()) {
            throw DataError("explain: instance " + std::to_string(id) + " is out of range (" +
                            std::to_string(data.row_count()) + " rows)");
        }
        GateProfile profile = gate_profile(model, data.instance(id));
        std::string text = "layer,kind,values\n";
        for (size_t l = 0; l < profile.bitwise.size(); ++l) {
            text += std::to_string(l + 1) + ",bitwise";
            for (Eigen::Index i = 0; i < profile.bitwise[l].size(); ++i) {
                text += "," + fmt(profile.bitwise[l](i));
            }
            text += "\n" + std::to_string(l + 1) + ",fieldwise";
            for (Eigen::Index i = 0; i < profile.fieldwise[l].size(); ++i) {
                text += "," + fmt(profile.fieldwise[l](i));
            }
            text += "\n";
        }
        std::string path = join(options.out_dir, "gates_" + std::to_string(id) + ".csv");
        write_text(path, text);
        out.files.push_back(path);
    }

    // Dataset-level field importance per layer.
    std::vector<Vec> importance = aggregate_importance(model, data, options.importance_n);
    {
        std::string text = "layer";
        for (size_t f = 0; f < F; ++f) text += ",field" + std::to_string(f);
        text += "\n";
        for (size_t l = 0; l < importance.size(); ++l) {
            text += std::to_string(l + 1);
            for (Eigen::Index f = 0; f < importance[l].size(); ++f) {
                text += "," + fmt(importance[l](f));
            }
            text += "\n";
        }
        std::string path = join(options.out_dir, "field_importance.csv");
        write_text(path, text);
        out.files.push_back(path);
    }

    // Condensed dimensions against layer-1 importance.
    FdoReport fdo = fdo_plan(model.embeddings, model.field_sizes, {options.ratio});
    std::vector<double> dim_values, importance_values;
    for (const auto& f : fdo.plans[0].fields) dim_values.push_back(f.dim);
    for (Eigen::Index f = 0; f < importance[0].size(); ++f) {
        importance_values.push_back(importance[0](f));
    }
    out.dims_vs_importance = pearson(dim_values, importance_values);

    json stats;
    stats["ratio"] = options.ratio;
    json jd = json::array();
    for (double v : dim_values) jd.push_back(static_cast<int>(v));
    stats["dims"] = std::move(jd);
    stats["layer1_importance"] = importance_values;
    stats["pearson_r"] = out.dims_vs_importance.r;
    stats["pearson_p"] = out.dims_vs_importance.p_value;
    stats["importance_threshold"] = kImportanceThreshold;
    stats["instances_used"] = std::min(options.importance_n, data.row_count());

    if (!options.compare_checkpoint.empty()) {
        Model other = load_checkpoint(options.compare_checkpoint);
        if (other.cross.layers.empty()) {
            throw ConfigError("explain: comparison checkpoint has no cross layers");
        }
        const std::vector<int> other_dims =
            other.config.use_alignment
                ? std::vector<int>(other.config.dims.size(), other.alignment.d_max)
                : other.config.dims;
        Mat a = block_norms(model.cross.layers[0].W_c, dims);
        Mat b = block_norms(other.cross.layers[0].W_c, other_dims);
        out.cosine = cosine_similarity(a, b);
        stats["cosine_similarity"] = *out.cosine;
        stats["compared_checkpoint"] = file_digest(options.compare_checkpoint);
    }

    std::string stats_path = join(options.out_dir, "stats.json");
    write_text(stats_path, stats.dump(2) + "\n");
    out.files.push_back(stats_path);
    return out;
}

}  // namespace gdcn
