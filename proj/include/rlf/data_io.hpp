#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlf/common.hpp"
#include "rlf/dataset.hpp"
#include "rlf/model.hpp"
#include "rlf/rng.hpp"

namespace rlf::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc{} && res.ptr == end && std::isfinite(out);
}

inline bool parse_u32(std::string_view s, std::uint32_t& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

// Map raw label values onto dense class indices. Values that are already
// integers forming [0, N_c) are kept as-is (class_values stays empty);
// anything else is sorted and densified with the mapping recorded.
inline void densify_labels(const std::vector<double>& raw, std::uint32_t num_classes_override,
                           Dataset& ds) {
    std::vector<double> distinct(raw);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    bool integral = true;
    for (const double v : raw) {
        if (!(v >= 0.0) || v != std::floor(v)) {
            integral = false;
            break;
        }
    }
    const double max_value = distinct.empty() ? -1.0 : distinct.back();
    const bool identity =
        integral && (num_classes_override > 0
                         ? max_value < static_cast<double>(num_classes_override)
                         : max_value == static_cast<double>(distinct.size()) - 1.0);

    ds.labels.resize(raw.size());
    if (identity) {
        for (std::size_t n = 0; n < raw.size(); ++n)
            ds.labels[n] = static_cast<std::int32_t>(raw[n]);
        ds.num_classes = num_classes_override > 0
                             ? num_classes_override
                             : std::max<std::uint32_t>(2, static_cast<std::uint32_t>(max_value) + 1);
        ds.class_values.clear();
        return;
    }
    if (num_classes_override > 0 && distinct.size() > num_classes_override)
        throw ValidationError("labels: more distinct classes than num_classes override");
    std::map<double, std::int32_t> index;
    for (std::size_t i = 0; i < distinct.size(); ++i)
        index[distinct[i]] = static_cast<std::int32_t>(i);
    for (std::size_t n = 0; n < raw.size(); ++n) ds.labels[n] = index[raw[n]];
    ds.num_classes = std::max<std::uint32_t>(
        {2, static_cast<std::uint32_t>(distinct.size()), num_classes_override});
    ds.class_values = distinct;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

// ===== text loaders =====

// `<label> <index>:<value> ...` with 1-based indices; absent indices are 0.
// feature_dim defaults to the maximum index observed.
inline Dataset load_libsvm(const std::string& path, std::uint32_t feature_dim_override = 0,
                           std::uint32_t num_classes_override = 0) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    std::vector<double> raw_labels;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
    std::uint32_t max_index = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto fail = [&](const std::string& what) {
            throw ParseError(path + ": line " + std::to_string(line_no) + ": " + what);
        };

        std::vector<std::string_view> tokens;
        for (const auto tok : detail::split(text, ' '))
            if (!detail::trim(tok).empty()) tokens.push_back(detail::trim(tok));

        double label = 0.0;
        if (!detail::parse_double(tokens[0], label)) fail("bad label '" + std::string(tokens[0]) + "'");
        std::vector<std::pair<std::uint32_t, double>> row;
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto colon = tokens[t].find(':');
            if (colon == std::string_view::npos) fail("expected index:value pair");
            std::uint32_t idx = 0;
            double value = 0.0;
            if (!detail::parse_u32(tokens[t].substr(0, colon), idx) || idx < 1)
                fail("bad feature index");
            if (!detail::parse_double(tokens[t].substr(colon + 1), value))
                fail("bad feature value");
            if (feature_dim_override > 0 && idx > feature_dim_override)
                fail("feature index exceeds feature_dim");
            max_index = std::max(max_index, idx);
            row.emplace_back(idx - 1, value);
        }
        raw_labels.push_back(label);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": no samples");

    Dataset ds;
    ds.num_samples = rows.size();
    ds.feature_dim = feature_dim_override > 0 ? feature_dim_override : max_index;
    ds.features.assign(ds.num_samples * ds.feature_dim, 0.0);
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (const auto& [idx, value] : rows[n])
            ds.features[n * ds.feature_dim + idx] = value;
    detail::densify_labels(raw_labels, num_classes_override, ds);
    validate_dataset(ds);
    return ds;
}

// Rectangular numeric CSV; a non-numeric first row is treated as a header.
// label_column selects the label; the remaining columns become features.
inline Dataset load_csv(const std::string& path, std::uint32_t label_column = 0,
                        std::uint32_t num_classes_override = 0) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    std::vector<double> raw_labels;
    std::vector<double> features;
    std::size_t columns = 0;

    std::string line;
    std::size_t line_no = 0;
    bool first_content_row = true;
    std::vector<double> cells;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty()) continue;

        const auto parts = detail::split(text, ',');
        cells.clear();
        bool numeric = true;
        for (const auto part : parts) {
            double v = 0.0;
            if (!detail::parse_double(part, v)) {
                numeric = false;
                break;
            }
            cells.push_back(v);
        }
        if (!numeric) {
            if (first_content_row) {  // header row
                first_content_row = false;
                continue;
            }
            throw ParseError(path + ": row " + std::to_string(line_no) + ": non-numeric cell");
        }
        if (columns == 0) {
            columns = cells.size();
            if (columns < 2)
                throw ValidationError(path + ": need at least one feature column and a label");
            if (label_column >= columns)
                throw ValidationError(path + ": label column out of range");
        } else if (cells.size() != columns) {
            throw ParseError(path + ": row " + std::to_string(line_no) + ": expected " +
                             std::to_string(columns) + " columns, found " +
                             std::to_string(cells.size()));
        }
        first_content_row = false;
        raw_labels.push_back(cells[label_column]);
        for (std::size_t c = 0; c < columns; ++c)
            if (c != label_column) features.push_back(cells[c]);
    }
    if (raw_labels.empty()) throw ValidationError(path + ": no samples");

    Dataset ds;
    ds.num_samples = raw_labels.size();
    ds.feature_dim = static_cast<std::uint32_t>(columns - 1);
    ds.features = std::move(features);
    detail::densify_labels(raw_labels, num_classes_override, ds);
    validate_dataset(ds);
    return ds;
}

// ===== IDX (image) loader =====

namespace detail {

inline std::vector<char> read_file(const std::string& path, const char* kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(std::string(kind) + ": cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return bytes;
}

inline std::uint32_t read_be32(const std::vector<char>& bytes, std::size_t offset) {
    const auto b = [&](std::size_t i) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i]));
    };
    return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

}  // namespace detail

// Standard IDX pair: big-endian magic 0x803 for images, 0x801 for labels.
// Pixels are scaled to [0, 1]; images flatten row-major to rows*cols features.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::uint32_t num_classes_override = 0) {
    const auto img = detail::read_file(images_path, "idx images");
    const auto lab = detail::read_file(labels_path, "idx labels");
    if (img.size() < 16) throw FormatError(images_path + ": truncated idx header");
    if (lab.size() < 8) throw FormatError(labels_path + ": truncated idx header");
    if (detail::read_be32(img, 0) != 0x00000803u)
        throw FormatError(images_path + ": bad idx image magic");
    if (detail::read_be32(lab, 0) != 0x00000801u)
        throw FormatError(labels_path + ": bad idx label magic");

    const std::uint32_t n_img = detail::read_be32(img, 4);
    const std::uint32_t rows = detail::read_be32(img, 8);
    const std::uint32_t cols = detail::read_be32(img, 12);
    const std::uint32_t n_lab = detail::read_be32(lab, 4);
    if (n_img != n_lab)
        throw FormatError("idx: image count " + std::to_string(n_img) +
                          " does not match label count " + std::to_string(n_lab));
    const std::uint64_t d = std::uint64_t{rows} * cols;
    if (img.size() != 16 + n_img * d) throw FormatError(images_path + ": image payload size mismatch");
    if (lab.size() != 8 + std::uint64_t{n_lab}) throw FormatError(labels_path + ": label payload size mismatch");

    Dataset ds;
    ds.num_samples = n_img;
    ds.feature_dim = static_cast<std::uint32_t>(d);
    ds.features.resize(ds.num_samples * d);
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        ds.features[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
    std::vector<double> raw_labels(n_lab);
    for (std::uint32_t i = 0; i < n_lab; ++i)
        raw_labels[i] = static_cast<unsigned char>(lab[8 + i]);
    detail::densify_labels(raw_labels, num_classes_override, ds);
    validate_dataset(ds);
    return ds;
}

// ===== model container =====
//
// Layout (little-endian):
//   "RLF1" | kind u8 | num_trees u32 | num_classes u32 | feature_dim u32
//   per tree: depth u32, then 2^depth-1 nodes as (feature_index i32,
//   threshold f64), then 2^depth * num_classes leaf logs as f64.

struct ModelFileHeader {
    char magic[4] = {'R', 'L', 'F', '1'};
    std::uint8_t kind = 0;
    std::uint32_t num_trees = 0;
    std::uint32_t num_classes = 0;
    std::uint32_t feature_dim = 0;
};

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_i32(std::vector<char>& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f64(std::vector<char>& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Cursor {
    const std::vector<char>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > bytes.size())
            throw FormatError(std::string("model file truncated reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        double d = 0.0;
        std::memcpy(&d, &v, sizeof(d));
        return d;
    }
};

}  // namespace detail

inline void save_model(const ForestModel& forest, const std::string& path) {
    validate_forest(forest);
    std::vector<char> out;
    out.push_back('R');
    out.push_back('L');
    out.push_back('F');
    out.push_back('1');
    out.push_back(static_cast<char>(forest.kind));
    detail::put_u32(out, static_cast<std::uint32_t>(forest.trees.size()));
    detail::put_u32(out, forest.num_classes);
    detail::put_u32(out, forest.feature_dim);
    for (const auto& tree : forest.trees) {
        detail::put_u32(out, tree.depth);
        for (const auto& node : tree.nodes) {
            detail::put_i32(out, node.feature_index);
            detail::put_f64(out, node.threshold);
        }
        for (const double v : tree.leaf_log_residuals) detail::put_f64(out, v);
    }

    // write-to-temp then atomic rename: no partial files on failure
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError("save_model: cannot open " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw FormatError("save_model: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline ForestModel load_model(const std::string& path) {
    const auto bytes = detail::read_file(path, "model");
    detail::Cursor cur{bytes};
    cur.need(4, "magic");
    if (std::memcmp(bytes.data(), "RLF1", 4) != 0)
        throw FormatError(path + ": bad magic, not an RLF1 model file");
    cur.pos = 4;
    cur.need(1, "kind");
    const auto kind_byte = static_cast<unsigned char>(bytes[cur.pos++]);
    if (kind_byte > 1) throw FormatError(path + ": unknown model kind");

    ForestModel forest;
    forest.kind = static_cast<ForestKind>(kind_byte);
    const std::uint32_t num_trees = cur.u32("tree count");
    forest.num_classes = cur.u32("class count");
    forest.feature_dim = cur.u32("feature dim");
    if (forest.num_classes < 2) throw FormatError(path + ": invalid class count");
    if (forest.feature_dim < 1) throw FormatError(path + ": invalid feature dim");

    forest.trees.reserve(num_trees);
    for (std::uint32_t t = 0; t < num_trees; ++t) {
        TreeModel tree;
        tree.depth = cur.u32("tree depth");
        if (tree.depth < 1 || tree.depth > 30)
            throw FormatError(path + ": implausible tree depth " + std::to_string(tree.depth));
        tree.num_classes = forest.num_classes;
        const std::size_t nodes = tree.node_count();
        const std::size_t leaves = tree.leaf_count() * forest.num_classes;
        cur.need(nodes * 12 + leaves * 8, "tree body");
        tree.nodes.resize(nodes);
        for (auto& node : tree.nodes) {
            node.feature_index = cur.i32("node feature");
            node.threshold = cur.f64("node threshold");
        }
        tree.leaf_log_residuals.resize(leaves);
        for (auto& v : tree.leaf_log_residuals) v = cur.f64("leaf value");
        forest.trees.push_back(std::move(tree));
    }
    if (cur.pos != bytes.size())
        throw FormatError(path + ": trailing bytes after model body");
    validate_forest(forest);
    return forest;
}

// ===== subsampling =====

namespace detail {

inline Dataset take_rows(const Dataset& ds, std::vector<std::uint32_t> ids) {
    std::sort(ids.begin(), ids.end());
    Dataset out;
    out.num_samples = ids.size();
    out.feature_dim = ds.feature_dim;
    out.num_classes = ds.num_classes;
    out.class_values = ds.class_values;
    out.features.reserve(ids.size() * ds.feature_dim);
    out.labels.reserve(ids.size());
    for (const auto id : ids) {
        const auto row = ds.row(id);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(ds.labels[id]);
    }
    return out;
}

inline std::vector<std::vector<std::uint32_t>> by_class(const Dataset& ds) {
    std::vector<std::vector<std::uint32_t>> classes(ds.num_classes);
    for (std::size_t n = 0; n < ds.num_samples; ++n)
        classes[ds.labels[n]].push_back(static_cast<std::uint32_t>(n));
    return classes;
}

}  // namespace detail

// Proportional per-class sampling without replacement, deterministic per seed.
inline Dataset stratified_subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
    validate_dataset(ds);
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ValidationError("stratified_subsample: fraction must lie in (0, 1]");
    std::vector<std::uint32_t> picked;
    const auto classes = detail::by_class(ds);
    for (std::uint32_t c = 0; c < ds.num_classes; ++c) {
        const auto& members = classes[c];
        if (members.empty()) continue;
        const auto want = static_cast<std::uint32_t>(std::min<long long>(
            static_cast<long long>(members.size()),
            std::llround(fraction * static_cast<double>(members.size()))));
        if (want == 0)
            throw ValidationError("stratified_subsample: fraction yields zero samples for class " +
                                  std::to_string(c));
        auto rng = derive_stream(seed, StreamPurpose::kSubsample, c);
        for (const auto i :
             sample_without_replacement(static_cast<std::uint32_t>(members.size()), want, rng))
            picked.push_back(members[i]);
    }
    return detail::take_rows(ds, std::move(picked));
}

// Cap each class at per_class_cap samples, drawn without replacement.
inline Dataset stratified_subsample_cap(const Dataset& ds, std::uint32_t per_class_cap,
                                        std::uint64_t seed) {
    validate_dataset(ds);
    if (per_class_cap < 1) throw ValidationError("stratified_subsample: cap must be >= 1");
    std::vector<std::uint32_t> picked;
    const auto classes = detail::by_class(ds);
    for (std::uint32_t c = 0; c < ds.num_classes; ++c) {
        const auto& members = classes[c];
        if (members.empty()) continue;
        const auto want = std::min<std::uint32_t>(per_class_cap,
                                                  static_cast<std::uint32_t>(members.size()));
        auto rng = derive_stream(seed, StreamPurpose::kSubsample, c);
        for (const auto i :
             sample_without_replacement(static_cast<std::uint32_t>(members.size()), want, rng))
            picked.push_back(members[i]);
    }
    return detail::take_rows(ds, std::move(picked));
}

}  // namespace rlf::io
