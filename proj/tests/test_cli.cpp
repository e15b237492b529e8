#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gdcn/checkpoint.hpp"
#include "gdcn/common.hpp"

// End-to-end drive of the installed binary; GDCN_CLI_PATH is injected by
// the build.

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "gdcn_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

int run_cli(const std::string& args, const fs::path& dir, std::string* output = nullptr) {
    fs::path capture = dir / "cli_output.txt";
    std::string cmd =
        std::string(GDCN_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    if (output) *output = slurp(capture.string());
    return WEXITSTATUS(rc);
}

std::string toy_csv(uint64_t seed) {
    const char* colors[] = {"red", "green", "blue", "yellow"};
    gdcn::Rng rng(seed);
    std::string text = "label,num,cat_a,cat_b\n";
    for (int i = 0; i < 80; ++i) {
        int label = rng.u01() < 0.4 ? 1 : 0;
        std::string num = i % 9 == 0 ? "" : std::to_string(1 + rng.bounded(40));
        std::string a = colors[rng.bounded(4)];
        std::string b = "x" + std::to_string(rng.bounded(8));
        text += std::to_string(label) + "," + num + "," + a + "," + b + "\n";
    }
    return text;
}

const char* kFields = "num,numeric\ncat_a,categorical\ncat_b,categorical\n";

// Writes data and runs prep; returns the prep output directory.
fs::path cli_prep(const fs::path& dir, uint64_t seed) {
    spit(dir / "data.csv", toy_csv(seed));
    spit(dir / "fields.txt", kFields);
    fs::path prep = dir / "prep";
    std::string out;
    int rc = run_cli("prep --data " + (dir / "data.csv").string() + " --fields " +
                         (dir / "fields.txt").string() + " --out " + prep.string() +
                         " --threshold 2 --ratios 0.7,0.15,0.15 --seed 5",
                     dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    return prep;
}

std::string train_args(const fs::path& prep, const fs::path& out_dir, int max_epochs = 3) {
    return "train --train " + (prep / "train.bin").string() + " --val " +
           (prep / "val.bin").string() + " --schema " + (prep / "schema.json").string() +
           " --out " + out_dir.string() +
           " --variant gdcn-p --cross-layers 2 --dnn 6 --dropout 0.0 --dim 4"
           " --lr 0.001 --batch-size 16 --max-epochs " + std::to_string(max_epochs) +
           " --seed 3 --monitor auc --timing off";
}

// Replaces field f's table with a planted rank-r factorization so the
// condensed dims differ across fields.
void plant_rank(gdcn::Model& model, size_t f, int rank, uint64_t seed) {
    gdcn::Rng rng(seed);
    gdcn::RowMat& table = model.embeddings.tables[f];
    const Eigen::Index rows = table.rows();
    const Eigen::Index d = table.cols();
    REQUIRE(rank <= d);
    gdcn::Mat A = gdcn::Mat::Zero(rows, d);
    gdcn::Mat V = gdcn::Mat::Zero(d, rank);
    for (int k = 0; k < rank; ++k) {
        gdcn::Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.uniform(-1.0, 1.0);
        for (int j = 0; j < k; ++j) v -= V.col(j).dot(v) * V.col(j);
        V.col(k) = v / v.norm();
        gdcn::Vec u(rows);
        for (Eigen::Index i = 0; i < rows; ++i) u(i) = rng.uniform(-1.0, 1.0);
        u.array() -= u.mean();
        u /= u.norm();
        A += (8.0 - k) * u * V.col(k).transpose();
    }
    table = A;
}

}  // namespace

TEST_CASE("cli pipeline: prep, train, fdo, eval, explain") {
    fs::path dir = fresh_dir("pipeline");
    fs::path prep = cli_prep(dir, 17);
    for (const char* name : {"schema.json", "train.bin", "val.bin", "test.bin"}) {
        REQUIRE(fs::exists(prep / name));
    }

    std::string out;
    int rc = run_cli(train_args(prep, dir / "run"), dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    auto train_doc = json::parse(out);
    CHECK(train_doc.at("epochs_run").get<int>() == 3);
    CHECK(train_doc.at("diverged").get<bool>() == false);
    std::string ckpt = train_doc.at("checkpoint").get<std::string>();
    REQUIRE(fs::exists(ckpt));
    REQUIRE(fs::exists(train_doc.at("epoch_log").get<std::string>()));

    rc = run_cli("fdo --checkpoint " + ckpt + " --out " + (dir / "fdo").string() +
                     " --ratios 0.8,0.95",
                 dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    auto fdo_doc = json::parse(out);
    REQUIRE(fdo_doc.at("dims_files").size() == 2);
    std::string dims_file = fdo_doc.at("dims_files")[1].get<std::string>();
    REQUIRE(fs::exists(dims_file));
    REQUIRE(fs::exists(fdo_doc.at("report").get<std::string>()));

    // Retrain at the condensed dimensions.
    rc = run_cli(train_args(prep, dir / "run_condensed") + " --dims " + dims_file, dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);

    rc = run_cli("eval --checkpoint " + ckpt + " --data " + (prep / "test.bin").string() +
                     " --schema " + (prep / "schema.json").string() + " --out " +
                     (dir / "metrics.json").string(),
                 dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    auto metrics = json::parse(slurp((dir / "metrics.json").string()));
    CHECK(metrics.at("auc").is_number());
    CHECK(metrics.at("logloss").get<double>() > 0.0);
    CHECK(metrics.at("n").get<int>() > 0);

    // Plant distinct per-field ranks so the dims-vs-importance correlation
    // is well posed, then explain through the binary.
    gdcn::Model model = gdcn::load_checkpoint(ckpt);
    plant_rank(model, 0, 1, 71);
    plant_rank(model, 1, 2, 73);
    plant_rank(model, 2, 4, 79);
    std::string planted = (dir / "planted.bin").string();
    gdcn::save_checkpoint(planted, model);

    rc = run_cli("explain --checkpoint " + planted + " --data " + (prep / "val.bin").string() +
                     " --out " + (dir / "explain").string() +
                     " --instances 0,1 --importance-n 5 --ratio 0.95",
                 dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    auto explain_doc = json::parse(out);
    CHECK(explain_doc.at("files").size() == 6);
    CHECK(fs::exists(dir / "explain" / "stats.json"));
    CHECK(fs::exists(dir / "explain" / "gates_0.csv"));
    CHECK(fs::exists(dir / "explain" / "field_importance.csv"));
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
    fs::path dir = fresh_dir("badflags");
    std::string out;

    CHECK(run_cli("", dir) == 2);                  // a subcommand is required
    CHECK(run_cli("frobnicate", dir) == 2);        // unknown subcommand
    CHECK(run_cli("prep --bogus x", dir) == 2);    // unknown flag

    // Missing required flags.
    CHECK(run_cli("prep --data a.csv --fields f.txt", dir, &out) == 2);
    CHECK(out.find("--out") != std::string::npos);
    CHECK(run_cli("train --val v --schema s --out o", dir, &out) == 2);
    CHECK(out.find("--train") != std::string::npos);

    // Invalid values.
    fs::path prep = cli_prep(dir, 17);
    auto base = [&](const std::string& run, const std::string& extra) {
        return "train --train " + (prep / "train.bin").string() + " --val " +
               (prep / "val.bin").string() + " --schema " + (prep / "schema.json").string() +
               " --out " + (dir / run).string() + " --max-epochs 1 --dnn '' " + extra;
    };
    CHECK(run_cli(base("r1", "--variant dcn"), dir) == 2);
    CHECK(run_cli(base("r2", "--monitor loss"), dir) == 2);
    CHECK(run_cli(base("r3", "--gate maybe"), dir) == 2);
    CHECK(run_cli("prep --data " + (dir / "data.csv").string() + " --fields " +
                      (dir / "fields.txt").string() + " --out " + (dir / "p2").string() +
                      " --ratios 0.5,0.5",
                  dir) == 2);
}

TEST_CASE("cli reports missing data as exit code 3") {
    fs::path dir = fresh_dir("missing");
    spit(dir / "fields.txt", kFields);
    std::string out;
    CHECK(run_cli("prep --data " + (dir / "absent.csv").string() + " --fields " +
                      (dir / "fields.txt").string() + " --out " + (dir / "p").string(),
                  dir, &out) == 3);
    CHECK(run_cli("eval --checkpoint " + (dir / "no.bin").string() + " --data " +
                      (dir / "no.dat").string() + " --schema " + (dir / "no.json").string(),
                  dir) == 3);
    CHECK(run_cli("fdo --checkpoint " + (dir / "no.bin").string() + " --out " +
                      (dir / "f").string(),
                  dir) == 3);
}

TEST_CASE("cli config file fills flags and flags override it") {
    fs::path dir = fresh_dir("config");
    fs::path prep = cli_prep(dir, 17);

    json cfg;
    cfg["train"] = (prep / "train.bin").string();
    cfg["val"] = (prep / "val.bin").string();
    cfg["schema"] = (prep / "schema.json").string();
    cfg["variant"] = "gcn";
    cfg["dnn"] = "";
    cfg["dim"] = 3;
    cfg["lr"] = 0.01;
    cfg["batch-size"] = 16;
    cfg["max-epochs"] = 2;
    cfg["seed"] = 9;
    cfg["timing"] = "off";
    spit(dir / "cfg.json", cfg.dump(2));

    // Only --out comes from the command line.
    std::string out;
    int rc = run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                         (dir / "from_config").string(),
                     dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    std::istringstream log(slurp((dir / "from_config" / "epochs.jsonl").string()));
    std::string line;
    int epochs = 0;
    while (std::getline(log, line)) {
        auto doc = json::parse(line);
        CHECK(doc.at("lr").get<double>() == 0.01);
        ++epochs;
    }
    CHECK(epochs == 2);

    // A flag beats the config value.
    rc = run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                     (dir / "override").string() + " --lr 0.002 --max-epochs 1",
                 dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    std::istringstream log2(slurp((dir / "override" / "epochs.jsonl").string()));
    REQUIRE(std::getline(log2, line));
    CHECK(json::parse(line).at("lr").get<double>() == 0.002);

    // Broken config files are configuration errors.
    spit(dir / "broken.json", "{not json");
    CHECK(run_cli("train --config " + (dir / "broken.json").string() + " --out " +
                      (dir / "x").string(),
                  dir) == 2);
    json bad_type = cfg;
    bad_type["lr"] = "fast";
    spit(dir / "bad_type.json", bad_type.dump());
    CHECK(run_cli("train --config " + (dir / "bad_type.json").string() + " --out " +
                      (dir / "y").string(),
                  dir) == 2);
}

TEST_CASE("cli train runs are byte-reproducible and honor a zero epoch cap") {
    fs::path dir = fresh_dir("repro");
    fs::path prep = cli_prep(dir, 23);

    std::string out;
    REQUIRE(run_cli(train_args(prep, dir / "a"), dir, &out) == 0);
    REQUIRE(run_cli(train_args(prep, dir / "b"), dir, &out) == 0);
    CHECK(slurp((dir / "a" / "checkpoint.bin").string()) ==
          slurp((dir / "b" / "checkpoint.bin").string()));
    CHECK(slurp((dir / "a" / "epochs.jsonl").string()) ==
          slurp((dir / "b" / "epochs.jsonl").string()));

    int rc = run_cli(train_args(prep, dir / "zero", 0), dir, &out);
    CAPTURE(out);
    REQUIRE(rc == 0);
    auto doc = json::parse(out);
    CHECK(doc.at("epochs_run").get<int>() == 0);
    CHECK(doc.at("best_epoch").get<int>() == 0);
    CHECK(fs::exists(dir / "zero" / "checkpoint.bin"));
    CHECK(fs::file_size(dir / "zero" / "epochs.jsonl") == 0);
}
