#include "gdcn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdcn {

Batch make_batch(const EncodedDataset& data, const std::vector<uint32_t>& row_ids,
                 size_t begin, size_t end) {
    Batch batch;
    batch.field_count = data.field_count;
    batch.labels.reserve(end - begin);
    batch.indices.reserve((end - begin) * data.field_count);
    for (size_t i = begin; i < end; ++i) {
        uint32_t r = row_ids[i];
        batch.labels.push_back(data.labels[r]);
        const uint32_t* src = data.row(r);
        batch.indices.insert(batch.indices.end(), src, src + data.field_count);
    }
    return batch;
}

EmbeddingTables init_tables(const DatasetSchema& schema, const std::vector<int>& dims,
                            uint64_t seed) {
    const size_t F = schema.fields.size();
    if (dims.size() != F) {
        throw ConfigError("init_tables: " + std::to_string(dims.size()) + " dims for " +
                          std::to_string(F) + " fields");
    }
    EmbeddingTables out;
    out.dims = dims;
    out.tables.resize(F);
    for (size_t f = 0; f < F; ++f) {
        if (dims[f] < 1) throw ConfigError("init_tables: field " + schema.fields[f].name +
                                           " has dimension " + std::to_string(dims[f]));
        RowMat& t = out.tables[f];
        t.resize(schema.fields[f].size(), dims[f]);
        double scale = 1.0 / std::sqrt(static_cast<double>(dims[f]));
        Rng rng(derive_seed(seed, "emb", f));
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-scale, scale);
        }
    }
    return out;
}

namespace {

void check_index(uint32_t idx, const RowMat& table, size_t field) {
    if (idx >= static_cast<uint32_t>(table.rows())) {
        throw DataError("lookup: index " + std::to_string(idx) + " out of range for field " +
                        std::to_string(field) + " (" + std::to_string(table.rows()) + " rows)");
    }
}

}  // namespace

Vec lookup_concat(const EncodedInstance& instance, const EmbeddingTables& tables) {
    const size_t F = tables.tables.size();
    if (instance.indices.size() != F) {
        throw DataError("lookup: instance has " + std::to_string(instance.indices.size()) +
                        " indices, tables expect " + std::to_string(F));
    }
    Vec c0(tables.concat_width());
    Eigen::Index offset = 0;
    for (size_t f = 0; f < F; ++f) {
        const RowMat& t = tables.tables[f];
        check_index(instance.indices[f], t, f);
        c0.segment(offset, t.cols()) = t.row(instance.indices[f]).transpose();
        offset += t.cols();
    }
    return c0;
}

Mat lookup_concat_batch(const Batch& batch, const EmbeddingTables& tables) {
    const size_t F = tables.tables.size();
    if (batch.field_count != F) {
        throw DataError("lookup: batch has " + std::to_string(batch.field_count) +
                        " fields, tables expect " + std::to_string(F));
    }
    const size_t B = batch.size();
    Mat c0(tables.concat_width(), B);
    Eigen::Index offset = 0;
    for (size_t f = 0; f < F; ++f) {
        const RowMat& t = tables.tables[f];
        for (size_t b = 0; b < B; ++b) {
            uint32_t idx = batch.row(b)[f];
            check_index(idx, t, f);
            c0.block(offset, b, t.cols(), 1) = t.row(idx).transpose();
        }
        offset += t.cols();
    }
    return c0;
}

AlignmentLayer init_alignment(const std::vector<int>& dims, uint64_t seed) {
    if (dims.empty()) throw ConfigError("init_alignment: no dims");
    AlignmentLayer out;
    out.d_max = *std::max_element(dims.begin(), dims.end());
    out.matrices.reserve(dims.size());
    for (size_t f = 0; f < dims.size(); ++f) {
        Mat m(dims[f], out.d_max);
        double scale = 1.0 / std::sqrt(static_cast<double>(dims[f]));
        Rng rng(derive_seed(seed, "align", f));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-scale, scale);
        }
        out.matrices.push_back(std::move(m));
    }
    return out;
}

Vec align(const Vec& e_f, const Mat& M_f) {
    if (e_f.size() != M_f.rows()) {
        throw DataError("align: embedding width " + std::to_string(e_f.size()) +
                        " does not match matrix rows " + std::to_string(M_f.rows()));
    }
    return M_f.transpose() * e_f;
}

void SparseGrad::reset(const EmbeddingTables& tables) {
    rows.clear();
    rows.resize(tables.tables.size());
}

bool SparseGrad::empty() const {
    for (const auto& m : rows) {
        if (!m.empty()) return false;
    }
    return true;
}

void scatter_gradient(const EncodedInstance& instance, const Vec& grad_c0,
                      const EmbeddingTables& tables, SparseGrad& acc) {
    if (grad_c0.size() != tables.concat_width()) {
        throw DataError("scatter: gradient width " + std::to_string(grad_c0.size()) +
                        " does not match concat width " + std::to_string(tables.concat_width()));
    }
    if (acc.rows.size() != tables.tables.size()) acc.reset(tables);
    Eigen::Index offset = 0;
    for (size_t f = 0; f < tables.tables.size(); ++f) {
        Eigen::Index d = tables.tables[f].cols();
        auto [it, inserted] = acc.rows[f].try_emplace(instance.indices[f]);
        if (inserted) it->second = Vec::Zero(d);
        it->second += grad_c0.segment(offset, d);
        offset += d;
    }
}

void scatter_gradient_batch(const Batch& batch, const Mat& grad_c0,
                            const EmbeddingTables& tables, SparseGrad& acc) {
    if (grad_c0.rows() != tables.concat_width() ||
        grad_c0.cols() != static_cast<Eigen::Index>(batch.size())) {
        throw DataError("scatter: gradient shape does not match batch");
    }
    if (acc.rows.size() != tables.tables.size()) acc.reset(tables);
    Eigen::Index offset = 0;
    for (size_t f = 0; f < tables.tables.size(); ++f) {
        Eigen::Index d = tables.tables[f].cols();
        auto& field_rows = acc.rows[f];
        for (size_t b = 0; b < batch.size(); ++b) {
            auto [it, inserted] = field_rows.try_emplace(batch.row(b)[f]);
            if (inserted) it->second = Vec::Zero(d);
            it->second += grad_c0.block(offset, b, d, 1);
        }
        offset += d;
    }
}

}  // namespace gdcn
