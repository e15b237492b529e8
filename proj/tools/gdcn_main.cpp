#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gdcn/runner.hpp"

namespace {

using gdcn::ConfigError;
using json = nlohmann::json;

// Flag > config file > built-in default. Each getter fills its target only
// when the flag was absent and the config carries the mirrored key.
class ConfigOverlay {
public:
    void load(const std::string& path) {
        if (path.empty()) return;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        doc_ = json::parse(buf.str(), nullptr, false);
        if (doc_.is_discarded() || !doc_.is_object()) {
            throw ConfigError(path + ": config must be a JSON object");
        }
        path_ = path;
    }

    template <typename T>
    void fill(const CLI::Option* flag, const char* key, T& target) const {
        if (flag->count() > 0 || !doc_.is_object() || !doc_.contains(key)) return;
        try {
            target = doc_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + ": bad value for \"" + key + "\"");
        }
    }

    // Accepts a JSON array of numbers or the flag's comma string.
    void fill_int_list(const CLI::Option* flag, const char* key, std::vector<int>& target) const {
        if (flag->count() > 0 || !doc_.is_object() || !doc_.contains(key)) return;
        const json& v = doc_.at(key);
        if (v.is_string()) {
            target = parse_int_list(v.get<std::string>(), key);
            return;
        }
        try {
            target = v.get<std::vector<int>>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + ": bad value for \"" + key + "\"");
        }
    }

    void fill_double_list(const CLI::Option* flag, const char* key,
                          std::vector<double>& target) const {
        if (flag->count() > 0 || !doc_.is_object() || !doc_.contains(key)) return;
        const json& v = doc_.at(key);
        if (v.is_string()) {
            target = parse_double_list(v.get<std::string>(), key);
            return;
        }
        try {
            target = v.get<std::vector<double>>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + ": bad value for \"" + key + "\"");
        }
    }

    static std::vector<int> parse_int_list(const std::string& text, const char* what) {
        std::vector<int> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                size_t used = 0;
                out.push_back(std::stoi(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError(std::string(what) + ": '" + item + "' is not an integer");
            }
        }
        return out;
    }

    static std::vector<double> parse_double_list(const std::string& text, const char* what) {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                size_t used = 0;
                out.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
            }
        }
        return out;
    }

private:
    json doc_;
    std::string path_;
};

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

bool parse_on_off(const std::string& value, const char* flag) {
    if (value == "on") return true;
    if (value == "off") return false;
    throw ConfigError(std::string(flag) + " must be 'on' or 'off', got '" + value + "'");
}

struct PrepCli {
    gdcn::PrepOptions options;
    std::string config_path;
    std::string ratios_text = "0.8,0.1,0.1";
    CLI::Option *data_flag, *fields_flag, *out_flag, *threshold_flag, *ratios_flag, *seed_flag;

    void attach(CLI::App& cmd) {
        data_flag = cmd.add_option("--data", options.data_path, "Raw CSV with a header row");
        fields_flag =
            cmd.add_option("--fields", options.fields_path, "Field declarations (name,kind)");
        out_flag = cmd.add_option("--out", options.out_dir, "Output directory");
        threshold_flag = cmd.add_option("--threshold", options.threshold,
                                        "Minimum token count kept in the vocabulary")
                             ->capture_default_str();
        ratios_flag = cmd.add_option("--ratios", ratios_text, "Train,validation,test fractions")
                          ->capture_default_str();
        seed_flag = cmd.add_option("--seed", options.seed, "Split seed")->capture_default_str();
        cmd.add_option("--config", config_path, "JSON config file mirroring the flags");
    }

    int run() {
        ConfigOverlay cfg;
        cfg.load(config_path);
        cfg.fill(data_flag, "data", options.data_path);
        cfg.fill(fields_flag, "fields", options.fields_path);
        cfg.fill(out_flag, "out", options.out_dir);
        cfg.fill(threshold_flag, "threshold", options.threshold);
        cfg.fill(ratios_flag, "ratios", ratios_text);
        cfg.fill(seed_flag, "seed", options.seed);
        require(options.data_path, "--data");
        require(options.fields_path, "--fields");
        require(options.out_dir, "--out");

        auto ratios = ConfigOverlay::parse_double_list(ratios_text, "--ratios");
        if (ratios.size() != 3) throw ConfigError("--ratios needs exactly three fractions");
        options.ratios = {ratios[0], ratios[1], ratios[2]};

        gdcn::PrepResult result = gdcn::run_prep(options);
        json doc;
        doc["schema"] = result.schema_path;
        doc["schema_digest"] = result.schema_digest;
        doc["total_features"] = result.total_features;
        doc["rows"] = {{"train", result.n_train},
                       {"validation", result.n_val},
                       {"test", result.n_test}};
        std::cout << doc.dump(2) << "\n";
        return 0;
    }
};

struct TrainCli {
    gdcn::TrainOptions options;
    std::string config_path;
    std::string dnn_text = "400,400,400";
    std::string gate_text = "on";
    std::string align_text = "off";
    std::string monitor_text = "auc";
    std::string timing_text = "wall";
    CLI::Option *train_flag, *val_flag, *schema_flag, *out_flag, *variant_flag, *layers_flag,
        *dnn_flag, *gate_flag, *dims_flag, *align_flag, *dropout_flag, *dim_flag, *lr_flag,
        *batch_flag, *epochs_flag, *seed_flag, *monitor_flag, *timing_flag;

    void attach(CLI::App& cmd) {
        train_flag = cmd.add_option("--train", options.train_path, "Encoded training split");
        val_flag = cmd.add_option("--val", options.val_path, "Encoded validation split");
        schema_flag = cmd.add_option("--schema", options.schema_path, "Schema JSON from prep");
        out_flag = cmd.add_option("--out", options.out_dir, "Output directory");
        variant_flag = cmd.add_option("--variant", options.variant, "gcn, gdcn-s, or gdcn-p")
                           ->capture_default_str();
        layers_flag = cmd.add_option("--cross-layers", options.cross_layers,
                                     "Number of gated cross layers")
                          ->capture_default_str();
        dnn_flag =
            cmd.add_option("--dnn", dnn_text, "Hidden widths, comma separated; empty for none")
                ->capture_default_str();
        gate_flag = cmd.add_option("--gate", gate_text,
                                   "on: learned gates; off: all-ones (ungated cross)")
                        ->capture_default_str();
        dims_flag = cmd.add_option("--dims", options.dims_path,
                                   "Per-field dimensions file from the fdo command");
        align_flag = cmd.add_option("--align", align_text,
                                    "on: project each field to a common width before the towers")
                         ->capture_default_str();
        dropout_flag = cmd.add_option("--dropout", options.dropout, "DNN dropout rate")
                           ->capture_default_str();
        dim_flag = cmd.add_option("--dim", options.embed_dim,
                                  "Uniform embedding dimension (ignored with --dims)")
                       ->capture_default_str();
        lr_flag = cmd.add_option("--lr", options.train.learning_rate, "Adam learning rate")
                      ->capture_default_str();
        batch_flag = cmd.add_option("--batch-size", options.train.batch_size, "Minibatch size")
                         ->capture_default_str();
        epochs_flag = cmd.add_option("--max-epochs", options.train.max_epochs, "Epoch cap")
                          ->capture_default_str();
        seed_flag = cmd.add_option("--seed", options.train.seed, "Master seed")
                        ->capture_default_str();
        monitor_flag = cmd.add_option("--monitor", monitor_text,
                                      "auc or logloss: validation metric for scheduling")
                           ->capture_default_str();
        timing_flag = cmd.add_option("--timing", timing_text,
                                     "wall: real epoch seconds; off: write 0.0 for "
                                     "byte-reproducible logs")
                          ->capture_default_str();
        cmd.add_option("--config", config_path, "JSON config file mirroring the flags");
    }

    int run() {
        ConfigOverlay cfg;
        cfg.load(config_path);
        cfg.fill(train_flag, "train", options.train_path);
        cfg.fill(val_flag, "val", options.val_path);
        cfg.fill(schema_flag, "schema", options.schema_path);
        cfg.fill(out_flag, "out", options.out_dir);
        cfg.fill(variant_flag, "variant", options.variant);
        cfg.fill(layers_flag, "cross-layers", options.cross_layers);
        cfg.fill(gate_flag, "gate", gate_text);
        cfg.fill(dims_flag, "dims", options.dims_path);
        cfg.fill(align_flag, "align", align_text);
        cfg.fill(dropout_flag, "dropout", options.dropout);
        cfg.fill(dim_flag, "dim", options.embed_dim);
        cfg.fill(lr_flag, "lr", options.train.learning_rate);
        cfg.fill(batch_flag, "batch-size", options.train.batch_size);
        cfg.fill(epochs_flag, "max-epochs", options.train.max_epochs);
        cfg.fill(seed_flag, "seed", options.train.seed);
        cfg.fill(monitor_flag, "monitor", monitor_text);
        cfg.fill(timing_flag, "timing", timing_text);
        require(options.train_path, "--train");
        require(options.val_path, "--val");
        require(options.schema_path, "--schema");
        require(options.out_dir, "--out");

        std::vector<int> dnn_widths;
        if (!dnn_text.empty()) {
            dnn_widths = ConfigOverlay::parse_int_list(dnn_text, "--dnn");
        }
        cfg.fill_int_list(dnn_flag, "dnn", dnn_widths);
        options.dnn_widths = dnn_widths;

        options.gate_on = parse_on_off(gate_text, "--gate");
        options.use_alignment = parse_on_off(align_text, "--align");

        if (monitor_text == "auc") {
            options.train.monitor = gdcn::Monitor::ValidationAUC;
        } else if (monitor_text == "logloss") {
            options.train.monitor = gdcn::Monitor::ValidationLogLoss;
        } else {
            throw ConfigError("--monitor must be 'auc' or 'logloss'");
        }
        if (timing_text == "wall") {
            options.train.wall_timing = true;
        } else if (timing_text == "off") {
            options.train.wall_timing = false;
        } else {
            throw ConfigError("--timing must be 'wall' or 'off'");
        }

        gdcn::TrainOutput out = gdcn::run_train(options);
        json doc;
        doc["checkpoint"] = out.checkpoint_path;
        doc["epoch_log"] = out.log_path;
        doc["epochs_run"] = out.result.epoch_log.size();
        doc["best_epoch"] = out.result.best_epoch + 1;
        doc["stopped_early"] = out.result.stopped_early;
        if (!out.result.epoch_log.empty()) {
            doc["val_auc"] = out.best_val.auc;
            doc["val_logloss"] = out.best_val.logloss;
        }
        doc["diverged"] = out.result.diverged;
        std::cout << doc.dump(2) << "\n";
        if (out.result.diverged) {
            std::cerr << "training diverged; the checkpoint holds the last good parameters\n";
            return 4;
        }
        return 0;
    }
};

struct FdoCli {
    gdcn::FdoRunOptions options;
    std::string config_path;
    std::string ratios_text = "0.95";
    std::string center_text = "on";
    std::string energy_text = "squared";
    CLI::Option *ckpt_flag, *out_flag, *ratios_flag, *center_flag, *energy_flag;

    void attach(CLI::App& cmd) {
        ckpt_flag = cmd.add_option("--checkpoint", options.checkpoint_path,
                                   "Trained full-dimension checkpoint");
        out_flag = cmd.add_option("--out", options.out_dir, "Output directory");
        ratios_flag =
            cmd.add_option("--ratios", ratios_text, "Information ratios, comma separated")
                ->capture_default_str();
        center_flag = cmd.add_option("--center", center_text,
                                     "on: subtract column means before the spectrum")
                          ->capture_default_str();
        energy_flag = cmd.add_option("--energy", energy_text,
                                     "squared: σ² energies; raw: plain σ")
                          ->capture_default_str();
        cmd.add_option("--config", config_path, "JSON config file mirroring the flags");
    }

    int run() {
        ConfigOverlay cfg;
        cfg.load(config_path);
        cfg.fill(ckpt_flag, "checkpoint", options.checkpoint_path);
        cfg.fill(out_flag, "out", options.out_dir);
        cfg.fill(ratios_flag, "ratios", ratios_text);
        cfg.fill(center_flag, "center", center_text);
        cfg.fill(energy_flag, "energy", energy_text);
        require(options.checkpoint_path, "--checkpoint");
        require(options.out_dir, "--out");

        options.ratios = ConfigOverlay::parse_double_list(ratios_text, "--ratios");
        options.analysis.center = parse_on_off(center_text, "--center");
        if (energy_text == "squared") {
            options.analysis.squared_energy = true;
        } else if (energy_text == "raw") {
            options.analysis.squared_energy = false;
        } else {
            throw ConfigError("--energy must be 'squared' or 'raw'");
        }

        gdcn::FdoOutput out = gdcn::run_fdo(options);
        json doc;
        doc["report"] = out.report_path;
        doc["dims_files"] = out.dims_paths;
        json plans = json::array();
        for (const auto& plan : out.report.plans) {
            plans.push_back({{"ratio", plan.ratio},
                             {"embedding_params", plan.summary.P_e},
                             {"weighted_avg_dim", plan.summary.D_bar},
                             {"avg_dim", plan.summary.K_bar}});
        }
        doc["plans"] = std::move(plans);
        std::cout << doc.dump(2) << "\n";
        return 0;
    }
};

struct EvalCli {
    gdcn::EvalOptions options;
    std::string config_path;
    CLI::Option *ckpt_flag, *data_flag, *schema_flag, *out_flag, *batch_flag;

    void attach(CLI::App& cmd) {
        ckpt_flag = cmd.add_option("--checkpoint", options.checkpoint_path, "Model checkpoint");
        data_flag = cmd.add_option("--data", options.data_path, "Encoded split to score");
        schema_flag = cmd.add_option("--schema", options.schema_path,
                                     "Schema JSON; its digest must match the checkpoint");
        out_flag = cmd.add_option("--out", options.out_path, "Optional metrics JSON path");
        batch_flag = cmd.add_option("--batch-size", options.batch_size, "Scoring batch size")
                         ->capture_default_str();
        cmd.add_option("--config", config_path, "JSON config file mirroring the flags");
    }

    int run() {
        ConfigOverlay cfg;
        cfg.load(config_path);
        cfg.fill(ckpt_flag, "checkpoint", options.checkpoint_path);
        cfg.fill(data_flag, "data", options.data_path);
        cfg.fill(schema_flag, "schema", options.schema_path);
        cfg.fill(out_flag, "out", options.out_path);
        cfg.fill(batch_flag, "batch-size", options.batch_size);
        require(options.checkpoint_path, "--checkpoint");
        require(options.data_path, "--data");
        require(options.schema_path, "--schema");

        gdcn::EvalOutput out = gdcn::run_eval(options);
        std::cout << out.json_text;
        return 0;
    }
};

struct ExplainCli {
    gdcn::ExplainOptions options;
    std::string config_path;
    std::string instances_text;
    CLI::Option *ckpt_flag, *data_flag, *out_flag, *instances_flag, *n_flag, *ratio_flag,
        *compare_flag;

    void attach(CLI::App& cmd) {
        ckpt_flag = cmd.add_option("--checkpoint", options.checkpoint_path, "Model checkpoint");
        data_flag = cmd.add_option("--data", options.data_path, "Encoded split to explain");
        out_flag = cmd.add_option("--out", options.out_dir, "Output directory");
        instances_flag = cmd.add_option("--instances", instances_text,
                                        "Instance ordinals for gate profiles, comma separated");
        n_flag = cmd.add_option("--importance-n", options.importance_n,
                                "Instances averaged for field importance")
                     ->capture_default_str();
        ratio_flag = cmd.add_option("--ratio", options.ratio,
                                    "Information ratio for the dims-vs-importance correlation")
                         ->capture_default_str();
        compare_flag = cmd.add_option("--compare", options.compare_checkpoint,
                                      "Second checkpoint for block-norm cosine similarity");
        cmd.add_option("--config", config_path, "JSON config file mirroring the flags");
    }

    int run() {
        ConfigOverlay cfg;
        cfg.load(config_path);
        cfg.fill(ckpt_flag, "checkpoint", options.checkpoint_path);
        cfg.fill(data_flag, "data", options.data_path);
        cfg.fill(out_flag, "out", options.out_dir);
        cfg.fill(instances_flag, "instances", instances_text);
        cfg.fill(n_flag, "importance-n", options.importance_n);
        cfg.fill(ratio_flag, "ratio", options.ratio);
        cfg.fill(compare_flag, "compare", options.compare_checkpoint);
        require(options.checkpoint_path, "--checkpoint");
        require(options.data_path, "--data");
        require(options.out_dir, "--out");

        if (!instances_text.empty()) {
            for (int v : ConfigOverlay::parse_int_list(instances_text, "--instances")) {
                if (v < 0) throw ConfigError("--instances must be non-negative");
                options.instances.push_back(static_cast<uint32_t>(v));
            }
        }

        gdcn::ExplainOutput out = gdcn::run_explain(options);
        json doc;
        doc["files"] = out.files;
        doc["pearson_r"] = out.dims_vs_importance.r;
        doc["pearson_p"] = out.dims_vs_importance.p_value;
        if (out.cosine) doc["cosine_similarity"] = *out.cosine;
        std::cout << doc.dump(2) << "\n";
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated cross network CTR prediction toolkit"};
    app.require_subcommand(1);

    PrepCli prep;
    TrainCli train;
    FdoCli fdo;
    EvalCli eval;
    ExplainCli explain;

    prep.attach(*app.add_subcommand("prep", "Encode a raw CSV into splits and a schema"));
    train.attach(*app.add_subcommand("train", "Train a model on encoded splits"));
    fdo.attach(*app.add_subcommand("fdo", "Pick per-field dimensions from a checkpoint"));
    eval.attach(*app.add_subcommand("eval", "Score an encoded split with a checkpoint"));
    explain.attach(*app.add_subcommand("explain", "Export interpretability reports"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("prep")) return prep.run();
        if (app.got_subcommand("train")) return train.run();
        if (app.got_subcommand("fdo")) return fdo.run();
        if (app.got_subcommand("eval")) return eval.run();
        if (app.got_subcommand("explain")) return explain.run();
    } catch (const gdcn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gdcn::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const gdcn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
