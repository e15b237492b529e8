#include "gdcn/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gdcn {

namespace {

using json = nlohmann::json;

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string kind_name(FieldKind kind) {
    return kind == FieldKind::Categorical ? "categorical" : "numeric";
}

FieldKind kind_from_name(const std::string& name, const std::string& context) {
    if (name == "categorical") return FieldKind::Categorical;
    if (name == "numeric") return FieldKind::Numeric;
    throw ConfigError(context + ": unknown field kind '" + name + "'");
}

}  // namespace

std::vector<FieldDecl> load_field_decls(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open field declarations: " + path);
    std::vector<FieldDecl> decls;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split_commas(line);
        if (parts.size() != 2) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'name,kind'");
        }
        decls.push_back({parts[0], kind_from_name(parts[1], path + ":" + std::to_string(line_no))});
    }
    if (decls.empty()) throw ConfigError(path + ": no field declarations");
    return decls;
}

RawDataset load_csv(const std::string& path, const std::vector<FieldDecl>& decls) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);

    RawDataset data;
    data.decls = decls;

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    auto header = split_commas(strip_cr(line));
    if (header.size() != decls.size() + 1 || header[0] != "label") {
        throw DataError(path + ": header must be 'label' followed by the declared fields");
    }
    for (size_t f = 0; f < decls.size(); ++f) {
        if (header[f + 1] != decls[f].name) {
            throw DataError(path + ": header column " + std::to_string(f + 2) + " is '" +
                            header[f + 1] + "', declared field is '" + decls[f].name + "'");
        }
    }

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto cols = split_commas(line);
        if (cols.size() != decls.size() + 1) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(decls.size() + 1) + " columns, got " +
                            std::to_string(cols.size()));
        }
        RawRecord rec;
        rec.label = cols[0];
        rec.values.assign(cols.begin() + 1, cols.end());
        data.rows.push_back(std::move(rec));
    }
    return data;
}

std::string discretize_numeric(double z) {
    if (!std::isfinite(z)) return kMissingToken;
    double v = z > 2.0 ? std::floor(std::log2(z)) : std::floor(z);
    return std::to_string(static_cast<long long>(v));
}

std::string numeric_token(const std::string& raw) {
    if (raw.empty()) return kMissingToken;
    const char* begin = raw.c_str();
    char* end = nullptr;
    double z = std::strtod(begin, &end);
    if (end != begin + raw.size()) return kMissingToken;
    return discretize_numeric(z);
}

DatasetSchema build_schema(const std::vector<RawRecord>& rows,
                           const std::vector<FieldDecl>& decls,
                           uint32_t threshold) {
    if (rows.empty()) throw DataError("build_schema: no rows");
    if (decls.empty()) throw ConfigError("build_schema: no field declarations");

    const size_t F = decls.size();
    struct TokenStat {
        uint64_t count = 0;
        uint64_t first_pos = 0;
    };
    std::vector<std::unordered_map<std::string, TokenStat>> stats(F);

    uint64_t pos = 0;
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].values.size() != F) {
            throw DataError("row " + std::to_string(r) + ": expected " + std::to_string(F) +
                            " fields, got " + std::to_string(rows[r].values.size()));
        }
        for (size_t f = 0; f < F; ++f) {
            std::string token = decls[f].kind == FieldKind::Numeric
                                    ? numeric_token(rows[r].values[f])
                                    : rows[r].values[f];
            auto [it, inserted] = stats[f].try_emplace(std::move(token));
            if (inserted) it->second.first_pos = pos;
            ++it->second.count;
            ++pos;
        }
    }

    DatasetSchema schema;
    schema.fields.resize(F);
    for (size_t f = 0; f < F; ++f) {
        FieldSchema& fs = schema.fields[f];
        fs.name = decls[f].name;
        fs.kind = decls[f].kind;

        std::vector<std::pair<uint64_t, const std::string*>> kept;
        for (const auto& [token, stat] : stats[f]) {
            if (stat.count >= threshold) kept.emplace_back(stat.first_pos, &token);
        }
        std::sort(kept.begin(), kept.end());
        for (size_t i = 0; i < kept.size(); ++i) {
            fs.vocab.emplace(*kept[i].second, static_cast<uint32_t>(i));
        }
        fs.unknown_index = static_cast<uint32_t>(kept.size());
    }
    return schema;
}

EncodedInstance encode_instance(const RawRecord& record, const DatasetSchema& schema,
                                size_t row_ordinal) {
    const size_t F = schema.fields.size();
    if (record.values.size() != F) {
        throw DataError("row " + std::to_string(row_ordinal) + ": expected " +
                        std::to_string(F) + " fields, got " +
                        std::to_string(record.values.size()));
    }
    EncodedInstance inst;
    if (record.label == "0") {
        inst.label = 0;
    } else if (record.label == "1") {
        inst.label = 1;
    } else {
        throw DataError("row " + std::to_string(row_ordinal) + ": label must be 0 or 1, got '" +
                        record.label + "'");
    }
    inst.indices.resize(F);
    for (size_t f = 0; f < F; ++f) {
        const FieldSchema& fs = schema.fields[f];
        inst.indices[f] = fs.kind == FieldKind::Numeric
                              ? fs.index_of(numeric_token(record.values[f]))
                              : fs.index_of(record.values[f]);
    }
    return inst;
}

void EncodedDataset::append(const EncodedInstance& inst) {
    if (field_count == 0) field_count = static_cast<uint32_t>(inst.indices.size());
    labels.push_back(inst.label);
    indices.insert(indices.end(), inst.indices.begin(), inst.indices.end());
}

EncodedDataset encode_dataset(const std::vector<RawRecord>& rows, const DatasetSchema& schema) {
    EncodedDataset out;
    out.field_count = static_cast<uint32_t>(schema.fields.size());
    out.labels.reserve(rows.size());
    out.indices.reserve(rows.size() * schema.fields.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        out.append(encode_instance(rows[r], schema, r));
    }
    return out;
}

SplitIndices split_dataset(size_t n_rows, const std::array<double, 3>& ratios, uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (n_rows >= (1ull << 32)) throw DataError("dataset too large for 32-bit row ordinals");

    std::vector<uint32_t> order(n_rows);
    std::vector<uint64_t> key(n_rows);
    for (size_t i = 0; i < n_rows; ++i) {
        order[i] = static_cast<uint32_t>(i);
        key[i] = derive_seed(seed, "split", i);
    }
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return key[a] != key[b] ? key[a] < key[b] : a < b;
    });

    auto cut = [&](double cum) {
        long long c = std::llround(static_cast<double>(n_rows) * cum);
        return static_cast<size_t>(std::clamp<long long>(c, 0, static_cast<long long>(n_rows)));
    };
    size_t b1 = cut(ratios[0]);
    size_t b2 = cut(ratios[0] + ratios[1]);
    if (b2 < b1) b2 = b1;

    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + b1);
    out.validation.assign(order.begin() + b1, order.begin() + b2);
    out.test.assign(order.begin() + b2, order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ============================================================
// Schema serialization
// ============================================================

std::string DatasetSchema::to_json_string() const {
    json doc;
    doc["format_version"] = 1;
    json field_list = json::array();
    for (const auto& f : fields) {
        json jf;
        jf["name"] = f.name;
        jf["kind"] = kind_name(f.kind);
        jf["unknown_index"] = f.unknown_index;
        jf["size"] = f.size();
        json vocab = json::object();
        for (const auto& [token, idx] : f.vocab) vocab[token] = idx;
        jf["vocab"] = std::move(vocab);
        field_list.push_back(std::move(jf));
    }
    doc["fields"] = std::move(field_list);
    doc["total_features"] = total_features();
    return doc.dump(2) + "\n";
}

DatasetSchema DatasetSchema::from_json_string(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw DataError("schema: invalid JSON");
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
        throw DataError("schema: unsupported format_version");
    }
    DatasetSchema schema;
    for (const auto& jf : doc.at("fields")) {
        FieldSchema fs;
        fs.name = jf.at("name").get<std::string>();
        fs.kind = kind_from_name(jf.at("kind").get<std::string>(), "schema field " + fs.name);
        fs.unknown_index = jf.at("unknown_index").get<uint32_t>();
        for (const auto& [token, idx] : jf.at("vocab").items()) {
            fs.vocab.emplace(token, idx.get<uint32_t>());
        }
        if (fs.unknown_index != fs.vocab.size()) {
            throw DataError("schema field " + fs.name + ": unknown_index must follow the vocab");
        }
        std::vector<bool> seen(fs.vocab.size(), false);
        for (const auto& [token, idx] : fs.vocab) {
            if (idx >= fs.vocab.size() || seen[idx]) {
                throw DataError("schema field " + fs.name + ": vocab indices must be dense");
            }
            seen[idx] = true;
        }
        schema.fields.push_back(std::move(fs));
    }
    if (schema.fields.empty()) throw DataError("schema: no fields");
    return schema;
}

std::string DatasetSchema::digest() const {
    // Digest over a canonical dump; nlohmann objects serialize with sorted
    // keys, so the digest is stable across rebuilds of the same schema.
    return hex_digest(fnv1a64(to_json_string()));
}

void DatasetSchema::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write schema: " + path);
    out << to_json_string();
    if (!out) throw DataError("failed writing schema: " + path);
}

DatasetSchema DatasetSchema::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open schema: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

// ============================================================
// Encoded binary io
// ============================================================

namespace {

constexpr char kMagic[4] = {'G', 'D', 'C', 'N'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_encoded(const std::string& path, const EncodedDataset& data) {
    if (data.field_count == 0) throw DataError("write_encoded: empty field count");
    if (data.indices.size() != data.labels.size() * data.field_count) {
        throw DataError("write_encoded: index buffer does not match row count");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset: " + path);
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, data.field_count);
    const uint32_t* idx = data.indices.data();
    for (size_t r = 0; r < data.labels.size(); ++r) {
        out.put(static_cast<char>(data.labels[r]));
        for (uint32_t f = 0; f < data.field_count; ++f) put_u32(out, idx[r * data.field_count + f]);
    }
    if (!out) throw DataError("failed writing dataset: " + path);
}

EncodedDataset read_encoded(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12) throw DataError(path + ": truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) throw DataError(path + ": bad magic");
    uint32_t version = get_u32(p + 4);
    if (version != kFormatVersion) {
        throw DataError(path + ": unsupported version " + std::to_string(version));
    }
    EncodedDataset data;
    data.field_count = get_u32(p + 8);
    if (data.field_count == 0) throw DataError(path + ": zero field count");

    size_t row_bytes = 1 + 4 * static_cast<size_t>(data.field_count);
    size_t payload = bytes.size() - 12;
    if (payload % row_bytes != 0) throw DataError(path + ": truncated row data");
    size_t n = payload / row_bytes;
    data.labels.resize(n);
    data.indices.resize(n * data.field_count);
    const unsigned char* cur = p + 12;
    for (size_t r = 0; r < n; ++r) {
        if (*cur > 1) throw DataError(path + ": label out of range at row " + std::to_string(r));
        data.labels[r] = *cur++;
        for (uint32_t f = 0; f < data.field_count; ++f) {
            data.indices[r * data.field_count + f] = get_u32(cur);
            cur += 4;
        }
    }
    return data;
}

}  // namespace gdcn
