#include "gdcn/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace gdcn {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'G', 'D', 'C', 'N', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

struct TensorRef {
    std::string name;
    std::vector<Eigen::Index> shape;
    const double* data = nullptr;  // nullptr for row-major Eigen matrices
    const Mat* mat = nullptr;
    const RowMat* rowmat = nullptr;
    const Vec* vec = nullptr;

    Eigen::Index count() const {
        Eigen::Index n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
};

void collect_tensors(const Model& m, std::vector<TensorRef>& out) {
    auto add_mat = [&](std::string name, const Mat& t) {
        out.push_back({std::move(name), {t.rows(), t.cols()}, nullptr, &t, nullptr, nullptr});
    };
    auto add_rowmat = [&](std::string name, const RowMat& t) {
        out.push_back({std::move(name), {t.rows(), t.cols()}, nullptr, nullptr, &t, nullptr});
    };
    auto add_vec = [&](std::string name, const Vec& t) {
        out.push_back({std::move(name), {t.size()}, nullptr, nullptr, nullptr, &t});
    };

    for (size_t f = 0; f < m.embeddings.tables.size(); ++f) {
        add_rowmat("emb." + std::to_string(f), m.embeddings.tables[f]);
    }
    if (m.config.use_alignment) {
        for (size_t f = 0; f < m.alignment.matrices.size(); ++f) {
            add_mat("align." + std::to_string(f), m.alignment.matrices[f]);
        }
    }
    for (size_t l = 0; l < m.cross.layers.size(); ++l) {
        std::string prefix = "cross." + std::to_string(l) + ".";
        add_mat(prefix + "W_c", m.cross.layers[l].W_c);
        add_mat(prefix + "W_g", m.cross.layers[l].W_g);
        add_vec(prefix + "b", m.cross.layers[l].b);
    }
    for (size_t l = 0; l < m.mlp.layers.size(); ++l) {
        std::string prefix = "dnn." + std::to_string(l) + ".";
        add_mat(prefix + "W", m.mlp.layers[l].W);
        add_vec(prefix + "b", m.mlp.layers[l].b);
    }
    add_vec("head.w", m.head_w);
}

void append_le_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_le_f64(const unsigned char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void serialize_tensor(std::string& blob, const TensorRef& t) {
    if (t.vec) {
        for (Eigen::Index i = 0; i < t.vec->size(); ++i) append_le_f64(blob, (*t.vec)(i));
    } else if (t.mat) {
        for (Eigen::Index r = 0; r < t.mat->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.mat->cols(); ++c) append_le_f64(blob, (*t.mat)(r, c));
        }
    } else {
        for (Eigen::Index r = 0; r < t.rowmat->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.rowmat->cols(); ++c) {
                append_le_f64(blob, (*t.rowmat)(r, c));
            }
        }
    }
}

std::string gate_mode_name(GateMode m) {
    return m == GateMode::Learned ? "learned" : "all_ones";
}

GateMode gate_mode_from_name(const std::string& name) {
    if (name == "learned") return GateMode::Learned;
    if (name == "all_ones") return GateMode::AllOnes;
    throw DataError("checkpoint: unknown gate mode '" + name + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
    std::vector<TensorRef> tensors;
    collect_tensors(model, tensors);

    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["schema_digest"] = model.schema_digest;
    manifest["field_sizes"] = model.field_sizes;
    manifest["dims"] = model.config.dims;
    manifest["variant"] = variant_name(model.config.variant);
    manifest["cross_layers"] = model.config.cross_layers;
    manifest["dnn_widths"] = model.config.dnn_widths;
    manifest["gate_mode"] = gate_mode_name(model.config.gate_mode);
    manifest["dropout_rate"] = model.config.dropout_rate;
    manifest["use_alignment"] = model.config.use_alignment;

    json index = json::array();
    uint64_t offset = 0;
    for (const auto& t : tensors) {
        json entry;
        entry["name"] = t.name;
        entry["shape"] = t.shape;
        entry["offset"] = offset;
        index.push_back(std::move(entry));
        offset += static_cast<uint64_t>(t.count()) * 8;
    }
    manifest["tensors"] = std::move(index);

    std::string manifest_text = manifest.dump();
    std::string blob;
    blob.reserve(offset);
    for (const auto& t : tensors) serialize_tensor(blob, t);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    uint64_t len = manifest_text.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(lenbuf, 8);
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw DataError(path + ": not a checkpoint file");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<uint64_t>(p[8 + i]) << (8 * i);
    if (16 + len > bytes.size()) throw DataError(path + ": truncated manifest");

    json manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + len, nullptr, false);
    if (manifest.is_discarded()) throw DataError(path + ": manifest is not valid JSON");
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
        throw DataError(path + ": unsupported checkpoint version");
    }

    Model m;
    m.schema_digest = manifest.at("schema_digest").get<std::string>();
    m.field_sizes = manifest.at("field_sizes").get<std::vector<uint64_t>>();
    m.config.dims = manifest.at("dims").get<std::vector<int>>();
    m.config.variant = variant_from_name(manifest.at("variant").get<std::string>());
    m.config.cross_layers = manifest.at("cross_layers").get<int>();
    m.config.dnn_widths = manifest.at("dnn_widths").get<std::vector<int>>();
    m.config.gate_mode = gate_mode_from_name(manifest.at("gate_mode").get<std::string>());
    m.config.dropout_rate = manifest.at("dropout_rate").get<double>();
    m.config.use_alignment = manifest.at("use_alignment").get<bool>();

    const unsigned char* blob = p + 16 + len;
    size_t blob_size = bytes.size() - 16 - len;

    struct Loaded {
        std::vector<Eigen::Index> shape;
        const unsigned char* data;
    };
    std::unordered_map<std::string, Loaded> by_name;
    for (const auto& entry : manifest.at("tensors")) {
        Loaded l;
        l.shape = entry.at("shape").get<std::vector<Eigen::Index>>();
        uint64_t offset = entry.at("offset").get<uint64_t>();
        uint64_t count = 1;
        for (auto s : l.shape) count *= static_cast<uint64_t>(s);
        if (offset + count * 8 > blob_size) {
            throw DataError(path + ": tensor " + entry.at("name").get<std::string>() +
                            " extends past the blob");
        }
        l.data = blob + offset;
        by_name.emplace(entry.at("name").get<std::string>(), std::move(l));
    }

    auto take = [&](const std::string& name) -> Loaded {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError(path + ": missing tensor " + name);
        Loaded l = it->second;
        by_name.erase(it);
        return l;
    };
    auto read_mat = [&](const std::string& name, Mat& dst) {
        Loaded l = take(name);
        if (l.shape.size() != 2) throw DataError(path + ": tensor " + name + " is not a matrix");
        dst.resize(l.shape[0], l.shape[1]);
        const unsigned char* cur = l.data;
        for (Eigen::Index r = 0; r < dst.rows(); ++r) {
            for (Eigen::Index c = 0; c < dst.cols(); ++c) {
                dst(r, c) = read_le_f64(cur);
                cur += 8;
            }
        }
    };
    auto read_rowmat = [&](const std::string& name, RowMat& dst) {
        Loaded l = take(name);
        if (l.shape.size() != 2) throw DataError(path + ": tensor " + name + " is not a matrix");
        dst.resize(l.shape[0], l.shape[1]);
        const unsigned char* cur = l.data;
        for (Eigen::Index r = 0; r < dst.rows(); ++r) {
            for (Eigen::Index c = 0; c < dst.cols(); ++c) {
                dst(r, c) = read_le_f64(cur);
                cur += 8;
            }
        }
    };
    auto read_vec = [&](const std::string& name, Vec& dst) {
        Loaded l = take(name);
        if (l.shape.size() != 1) throw DataError(path + ": tensor " + name + " is not a vector");
        dst.resize(l.shape[0]);
        const unsigned char* cur = l.data;
        for (Eigen::Index i = 0; i < dst.size(); ++i) {
            dst(i) = read_le_f64(cur);
            cur += 8;
        }
    };

    const size_t F = m.field_sizes.size();
    if (m.config.dims.size() != F) throw DataError(path + ": dims do not match field count");
    m.embeddings.dims = m.config.dims;
    m.embeddings.tables.resize(F);
    for (size_t f = 0; f < F; ++f) {
        read_rowmat("emb." + std::to_string(f), m.embeddings.tables[f]);
        if (m.embeddings.tables[f].rows() != static_cast<Eigen::Index>(m.field_sizes[f]) ||
            m.embeddings.tables[f].cols() != m.config.dims[f]) {
            throw DataError(path + ": embedding table " + std::to_string(f) +
                            " shape does not match manifest");
        }
    }
    if (m.config.use_alignment) {
        m.alignment.matrices.resize(F);
        m.alignment.d_max = *std::max_element(m.config.dims.begin(), m.config.dims.end());
        for (size_t f = 0; f < F; ++f) {
            read_mat("align." + std::to_string(f), m.alignment.matrices[f]);
            if (m.alignment.matrices[f].rows() != m.config.dims[f] ||
                m.alignment.matrices[f].cols() != m.alignment.d_max) {
                throw DataError(path + ": alignment matrix " + std::to_string(f) +
                                " shape does not match dims");
            }
        }
    }
    m.cross.gate_mode = m.config.gate_mode;
    m.cross.layers.resize(m.config.cross_layers);
    for (int l = 0; l < m.config.cross_layers; ++l) {
        std::string prefix = "cross." + std::to_string(l) + ".";
        read_mat(prefix + "W_c", m.cross.layers[l].W_c);
        read_mat(prefix + "W_g", m.cross.layers[l].W_g);
        read_vec(prefix + "b", m.cross.layers[l].b);
    }
    m.mlp.dropout_rate = m.config.dropout_rate;
    m.mlp.layers.resize(m.config.dnn_widths.size());
    for (size_t l = 0; l < m.config.dnn_widths.size(); ++l) {
        std::string prefix = "dnn." + std::to_string(l) + ".";
        read_mat(prefix + "W", m.mlp.layers[l].W);
        read_vec(prefix + "b", m.mlp.layers[l].b);
    }
    read_vec("head.w", m.head_w);
    if (m.head_w.size() != m.head_width()) {
        throw DataError(path + ": head width does not match topology");
    }
    if (!by_name.empty()) {
        throw DataError(path + ": unexpected tensor " + by_name.begin()->first);
    }
    return m;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex_digest(fnv1a64(buf.str()));
}

}  // namespace gdcn
