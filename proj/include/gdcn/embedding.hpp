#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gdcn/common.hpp"
#include "gdcn/features.hpp"

namespace gdcn {

// A minibatch view: row-major B×F feature indices plus labels.
struct Batch {
    uint32_t field_count = 0;
    std::vector<uint32_t> indices;
    std::vector<uint8_t> labels;

    size_t size() const { return labels.size(); }
    const uint32_t* row(size_t i) const { return indices.data() + i * field_count; }
};

Batch make_batch(const EncodedDataset& data, const std::vector<uint32_t>& row_ids,
                 size_t begin, size_t end);

struct EmbeddingTables {
    std::vector<RowMat> tables;  // table f is |E_f| × d_f
    std::vector<int> dims;

    int field_count() const { return static_cast<int>(tables.size()); }

    // D: width of the concatenated base vector.
    int concat_width() const {
        int d = 0;
        for (int v : dims) d += v;
        return d;
    }

    uint64_t param_count() const {
        uint64_t p = 0;
        for (const auto& t : tables) p += static_cast<uint64_t>(t.rows()) * t.cols();
        return p;
    }
};

EmbeddingTables init_tables(const DatasetSchema& schema, const std::vector<int>& dims,
                            uint64_t seed);

Vec lookup_concat(const EncodedInstance& instance, const EmbeddingTables& tables);

// Column b of the result is lookup_concat of batch row b.
Mat lookup_concat_batch(const Batch& batch, const EmbeddingTables& tables);

// Projects a d_f-wide embedding to the shared width d_max. Widths follow
// the row-vector convention: align(e, M) = e·M.
struct AlignmentLayer {
    std::vector<Mat> matrices;  // M_f is d_f × d_max
    int d_max = 0;

    uint64_t param_count() const {
        uint64_t p = 0;
        for (const auto& m : matrices) p += static_cast<uint64_t>(m.rows()) * m.cols();
        return p;
    }
};

AlignmentLayer init_alignment(const std::vector<int>& dims, uint64_t seed);

Vec align(const Vec& e_f, const Mat& M_f);

// Gradients accumulate only on rows an instance touched; everything else
// stays absent so the optimizer can skip it.
struct SparseGrad {
    std::vector<std::unordered_map<uint32_t, Vec>> rows;

    void reset(const EmbeddingTables& tables);
    bool empty() const;
};

void scatter_gradient(const EncodedInstance& instance, const Vec& grad_c0,
                      const EmbeddingTables& tables, SparseGrad& acc);

void scatter_gradient_batch(const Batch& batch, const Mat& grad_c0,
                            const EmbeddingTables& tables, SparseGrad& acc);

}  // namespace gdcn
