#include "gdcn/fdo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gdcn {

std::vector<double> singular_values(const RowMat& table, const FdoOptions& options) {
    if (table.rows() < 1 || table.cols() < 1) throw DataError("singular_values: empty table");
    if (!table.allFinite()) throw NumericError("singular_values: non-finite table entries");

    Mat A = table;
    if (options.center) A.rowwise() -= A.colwise().mean();
    // Orthogonalize the columns of the thin side; their norms are the
    // singular values.
    if (A.rows() < A.cols()) A = Mat(A.transpose());

    const Eigen::Index d = A.cols();
    const double tol = 1e-15;
    for (int sweep = 0; sweep < 64; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p < d - 1; ++p) {
            for (Eigen::Index q = p + 1; q < d; ++q) {
                double alpha = A.col(p).squaredNorm();
                double beta = A.col(q).squaredNorm();
                double gamma = A.col(p).dot(A.col(q));
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                Vec ap = A.col(p);
                A.col(p) = c * ap - s * A.col(q);
                A.col(q) = s * ap + c * A.col(q);
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sv(d);
    for (Eigen::Index j = 0; j < d; ++j) sv[j] = A.col(j).norm();
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

int choose_dim(const std::vector<double>& sv, double ratio, const FdoOptions& options) {
    if (sv.empty()) throw ConfigError("choose_dim: empty spectrum");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("choose_dim: ratio must lie in (0,1]");

    auto energy = [&](double s) { return options.squared_energy ? s * s : s; };
    double total = 0.0;
    for (double s : sv) total += energy(s);
    if (total == 0.0) return 1;

    double cum = 0.0;
    for (size_t k = 0; k < sv.size(); ++k) {
        cum += energy(sv[k]);
        if (cum / total >= ratio) return static_cast<int>(k) + 1;
    }
    return static_cast<int>(sv.size());
}

std::vector<int> formula_dims(const std::vector<uint64_t>& field_sizes) {
    std::vector<int> dims;
    dims.reserve(field_sizes.size());
    for (uint64_t size : field_sizes) {
        long d = std::lround(std::pow(static_cast<double>(size), 0.25));
        dims.push_back(static_cast<int>(std::max(1l, d)));
    }
    return dims;
}

ParamSummary param_count(const std::vector<uint64_t>& field_sizes, const std::vector<int>& dims) {
    if (field_sizes.size() != dims.size() || field_sizes.empty()) {
        throw ConfigError("param_count: field sizes and dims must be parallel and non-empty");
    }
    ParamSummary out;
    uint64_t total_features = 0;
    uint64_t dim_sum = 0;
    for (size_t f = 0; f < dims.size(); ++f) {
        if (dims[f] < 1) throw ConfigError("param_count: dims must be at least 1");
        out.P_e += static_cast<uint64_t>(dims[f]) * field_sizes[f];
        total_features += field_sizes[f];
        dim_sum += static_cast<uint64_t>(dims[f]);
    }
    out.D_bar = static_cast<double>(out.P_e) / static_cast<double>(total_features);
    out.K_bar = static_cast<double>(dim_sum) / static_cast<double>(dims.size());
    return out;
}

FdoReport fdo_plan(const EmbeddingTables& tables, const std::vector<uint64_t>& field_sizes,
                   const std::vector<double>& ratios, const FdoOptions& options) {
    if (tables.tables.empty()) throw DataError("fdo_plan: checkpoint has no embedding tables");
    if (ratios.empty()) throw ConfigError("fdo_plan: no ratios requested");

    std::vector<std::vector<double>> spectra;
    spectra.reserve(tables.tables.size());
    for (const auto& table : tables.tables) spectra.push_back(singular_values(table, options));

    FdoReport report;
    for (double ratio : ratios) {
        FdoRatioPlan plan;
        plan.ratio = ratio;
        std::vector<int> dims;
        for (size_t f = 0; f < spectra.size(); ++f) {
            FdoFieldPlan fp;
            fp.field = static_cast<int>(f);
            fp.dim = choose_dim(spectra[f], ratio, options);
            fp.singular_values = spectra[f];
            dims.push_back(fp.dim);
            plan.fields.push_back(std::move(fp));
        }
        plan.summary = param_count(field_sizes, dims);
        report.plans.push_back(std::move(plan));
    }
    return report;
}

std::string dims_file_text(const FdoRatioPlan& plan, const std::string& source_digest) {
    nlohmann::json doc;
    doc["source_checkpoint"] = source_digest;
    doc["ratio"] = plan.ratio;
    nlohmann::json fields = nlohmann::json::array();
    for (const auto& f : plan.fields) {
        nlohmann::json jf;
        jf["field"] = f.field;
        jf["dim"] = f.dim;
        jf["singular_values"] = f.singular_values;
        fields.push_back(std::move(jf));
    }
    doc["fields"] = std::move(fields);
    return doc.dump(2) + "\n";
}

std::vector<int> load_dims_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dims file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc = nlohmann::json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded()) throw DataError(path + ": invalid JSON");

    std::vector<int> dims;
    for (const auto& jf : doc.at("fields")) {
        int field = jf.at("field").get<int>();
        if (field != static_cast<int>(dims.size())) {
            throw DataError(path + ": fields must be listed in order");
        }
        int dim = jf.at("dim").get<int>();
        if (dim < 1) throw DataError(path + ": dims must be at least 1");
        dims.push_back(dim);
    }
    if (dims.empty()) throw DataError(path + ": no fields");
    return dims;
}

}  // namespace gdcn
