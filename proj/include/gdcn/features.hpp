#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdcn/common.hpp"

namespace gdcn {

enum class FieldKind { Categorical, Numeric };

inline constexpr const char* kUnknownToken = "<unknown>";
inline constexpr const char* kMissingToken = "<missing>";

struct FieldDecl {
    std::string name;
    FieldKind kind;
};

struct FieldSchema {
    std::string name;
    FieldKind kind = FieldKind::Categorical;
    // Kept tokens only; indices are dense in [0, vocab.size()).
    std::unordered_map<std::string, uint32_t> vocab;
    uint32_t unknown_index = 0;

    // |E_f|: kept tokens plus the reserved unknown slot.
    uint32_t size() const { return static_cast<uint32_t>(vocab.size()) + 1; }

    uint32_t index_of(const std::string& token) const {
        auto it = vocab.find(token);
        return it == vocab.end() ? unknown_index : it->second;
    }
};

struct DatasetSchema {
    std::vector<FieldSchema> fields;

    int field_count() const { return static_cast<int>(fields.size()); }

    uint64_t total_features() const {
        uint64_t t = 0;
        for (const auto& f : fields) t += f.size();
        return t;
    }

    std::vector<uint64_t> field_sizes() const {
        std::vector<uint64_t> s;
        s.reserve(fields.size());
        for (const auto& f : fields) s.push_back(f.size());
        return s;
    }

    std::string to_json_string() const;
    static DatasetSchema from_json_string(const std::string& text);
    std::string digest() const;

    void save(const std::string& path) const;
    static DatasetSchema load(const std::string& path);
};

struct RawRecord {
    std::string label;
    std::vector<std::string> values;  // one token per field, schema order
};

struct RawDataset {
    std::vector<FieldDecl> decls;
    std::vector<RawRecord> rows;
};

struct EncodedInstance {
    std::vector<uint32_t> indices;
    uint8_t label = 0;
};

// Row-major index storage; one feature index per field per row.
struct EncodedDataset {
    uint32_t field_count = 0;
    std::vector<uint8_t> labels;
    std::vector<uint32_t> indices;

    size_t row_count() const { return labels.size(); }

    const uint32_t* row(size_t i) const { return indices.data() + i * field_count; }

    EncodedInstance instance(size_t i) const {
        EncodedInstance out;
        out.label = labels[i];
        out.indices.assign(row(i), row(i) + field_count);
        return out;
    }

    void append(const EncodedInstance& inst);
};

// `name,kind` per line, kind in {categorical, numeric}.
std::vector<FieldDecl> load_field_decls(const std::string& path);

// CSV with a header row; first column must be `label`, remaining column
// names must match the declarations in order.
RawDataset load_csv(const std::string& path, const std::vector<FieldDecl>& decls);

// z > 2 maps to floor(log2(z)); otherwise floor(z). Non-finite values are
// treated as missing, not as errors.
std::string discretize_numeric(double z);

// Raw CSV cell for a numeric field: empty or unparseable cells become the
// missing token, everything else goes through discretize_numeric.
std::string numeric_token(const std::string& raw);

// Tokens below `threshold` occurrences collapse into the field's unknown
// slot. Kept tokens are indexed in first-occurrence order; unknown is last.
DatasetSchema build_schema(const std::vector<RawRecord>& rows,
                           const std::vector<FieldDecl>& decls,
                           uint32_t threshold);

EncodedInstance encode_instance(const RawRecord& record, const DatasetSchema& schema,
                                size_t row_ordinal);

EncodedDataset encode_dataset(const std::vector<RawRecord>& rows, const DatasetSchema& schema);

struct SplitIndices {
    std::vector<uint32_t> train;
    std::vector<uint32_t> validation;
    std::vector<uint32_t> test;
};

// Deterministic in (n_rows, ratios, seed). Rows are ranked by a per-row
// hash and cut at the cumulative ratio boundaries, so partition sizes are
// exact up to rounding and no shuffle buffer is needed.
SplitIndices split_dataset(size_t n_rows, const std::array<double, 3>& ratios, uint64_t seed);

// Binary layout: magic "GDCN", u32 LE version, u32 LE field count, then per
// row a u8 label followed by field-count u32 LE feature indices.
void write_encoded(const std::string& path, const EncodedDataset& data);
EncodedDataset read_encoded(const std::string& path);

}  // namespace gdcn
