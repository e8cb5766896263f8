#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "linboost/error.hpp"
#include "linboost/random.hpp"

namespace linboost {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Training substrate: n samples (rows) of d real features plus a real target.
struct Dataset {
    FeatureMatrix features;
    Vector targets;
    std::vector<std::string> feature_names; // empty or exactly d entries
    std::string target_name = "y";

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }

    void validate() const {
        if (features.rows() < 1 || features.cols() < 1)
            throw DataError("dataset must have at least one row and one feature column");
        if (targets.size() != features.rows())
            throw DataError("target count " + std::to_string(targets.size()) +
                            " does not match row count " + std::to_string(features.rows()));
        if (!feature_names.empty() && feature_names.size() != cols())
            throw DataError("feature name count does not match feature column count");
        if (!features.allFinite() || !targets.allFinite())
            throw DataError("dataset contains non-finite values");
    }

    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
        out.targets.resize(static_cast<Eigen::Index>(indices.size()));
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto src = static_cast<Eigen::Index>(indices[r]);
            out.features.row(static_cast<Eigen::Index>(r)) = features.row(src);
            out.targets[static_cast<Eigen::Index>(r)] = targets[src];
        }
        out.feature_names = feature_names;
        out.target_name = target_name;
        return out;
    }

    std::string feature_name(std::size_t k) const {
        return feature_names.empty() ? "x" + std::to_string(k + 1) : feature_names[k];
    }
};

/// Sorted list of distinct row indices into a dataset.
struct SampleIndexSet {
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }

    static SampleIndexSet all(std::size_t n) {
        SampleIndexSet s;
        s.indices.resize(n);
        std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
        return s;
    }

    // Throws unless indices are sorted, distinct and below n.
    void validate(std::size_t n) const {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= n) throw std::out_of_range("sample index out of range");
            if (i > 0 && indices[i] <= indices[i - 1])
                throw std::invalid_argument("sample indices must be sorted and distinct");
        }
    }
};

/// Per-feature training means; subtracting them gives zero-mean features.
struct CenteringTransform {
    Vector means;

    FeatureMatrix apply(const FeatureMatrix& x) const {
        FeatureMatrix out = x;
        out.rowwise() -= means.transpose();
        return out;
    }

    FeatureMatrix invert(const FeatureMatrix& centered) const {
        FeatureMatrix out = centered;
        out.rowwise() += means.transpose();
        return out;
    }
};

inline CenteringTransform fit_centering(const Dataset& ds) {
    if (ds.rows() < 1) throw DataError("cannot fit centering on an empty dataset");
    CenteringTransform t;
    t.means = ds.features.colwise().mean().transpose();
    return t;
}

/// x -> [x, 1]
inline Vector augment(const Eigen::Ref<const Vector>& x) {
    Vector out(x.size() + 1);
    out.head(x.size()) = x;
    out[x.size()] = 1.0;
    return out;
}

/// ceil(fraction * n) distinct indices, uniformly without replacement, sorted.
inline SampleIndexSet subsample(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("subsample fraction must lie in (0, 1]");
    SampleIndexSet out = SampleIndexSet::all(n);
    if (fraction == 1.0) return out;
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    k = std::min(k, n);
    Rng rng(seed);
    auto& idx = out.indices;
    // Partial Fisher-Yates: the first k slots become the sample.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Raw numeric table as read from disk, before target extraction.
struct CsvTable {
    std::vector<std::string> header; // empty when the file has no header line
    FeatureMatrix values;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

inline CsvTable parse_csv(std::istream& in, bool has_header, const std::string& source = "<stream>") {
    CsvTable table;
    std::vector<double> cells;
    std::size_t width = 0;
    std::size_t data_rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        const auto parts = detail::split_commas(view);
        if (header_pending) {
            for (auto p : parts) table.header.emplace_back(detail::trim(p));
            width = parts.size();
            header_pending = false;
            continue;
        }
        if (width == 0) width = parts.size();
        if (parts.size() != width)
            throw DataError(source + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(parts.size()) + " columns, expected " +
                            std::to_string(width));
        for (std::size_t c = 0; c < parts.size(); ++c) {
            const auto v = detail::parse_real(parts[c]);
            if (!v)
                throw DataError(source + ": non-numeric or non-finite value '" +
                                std::string(detail::trim(parts[c])) + "' at row " +
                                std::to_string(data_rows + 1) + " (line " + std::to_string(line_no) +
                                "), column " + std::to_string(c + 1));
            cells.push_back(*v);
        }
        ++data_rows;
    }
    if (data_rows == 0) throw DataError(source + ": no data rows");
    table.values = Eigen::Map<FeatureMatrix>(cells.data(), static_cast<Eigen::Index>(data_rows),
                                             static_cast<Eigen::Index>(width));
    return table;
}

inline CsvTable read_csv_table(const std::filesystem::path& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return parse_csv(in, has_header, path.string());
}

/// Target selector: a header name, or a zero-based column index.
using TargetColumn = std::variant<std::string, std::size_t>;

inline std::optional<std::size_t> find_column(const CsvTable& table, const TargetColumn& target) {
    const auto width = static_cast<std::size_t>(table.values.cols());
    if (const auto* idx = std::get_if<std::size_t>(&target))
        return *idx < width ? std::optional<std::size_t>(*idx) : std::nullopt;
    const auto& name = std::get<std::string>(target);
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - table.header.begin());
}

inline Dataset table_to_dataset(const CsvTable& table, const TargetColumn& target) {
    const auto col = find_column(table, target);
    if (!col) {
        const std::string what = std::holds_alternative<std::string>(target)
                                     ? "'" + std::get<std::string>(target) + "'"
                                     : "index " + std::to_string(std::get<std::size_t>(target));
        throw DataError("target column " + what + " not found");
    }
    const auto width = static_cast<std::size_t>(table.values.cols());
    if (width < 2) throw DataError("need at least one feature column besides the target");
    Dataset ds;
    ds.features.resize(table.values.rows(), static_cast<Eigen::Index>(width - 1));
    Eigen::Index out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
        if (c == *col) continue;
        ds.features.col(out_col++) = table.values.col(static_cast<Eigen::Index>(c));
        if (!table.header.empty()) ds.feature_names.push_back(table.header[c]);
    }
    ds.targets = table.values.col(static_cast<Eigen::Index>(*col));
    ds.target_name = table.header.empty() ? "y" : table.header[*col];
    ds.validate();
    return ds;
}

inline Dataset load_csv(const std::filesystem::path& path, const TargetColumn& target, bool has_header) {
    return table_to_dataset(read_csv_table(path, has_header), target);
}

inline std::string format_real(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

/// Features then target, with a header line; 17 significant digits so values round-trip.
inline void write_csv(std::ostream& out, const Dataset& ds) {
    for (std::size_t k = 0; k < ds.cols(); ++k) out << ds.feature_name(k) << ',';
    out << ds.target_name << '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < ds.cols(); ++k)
            out << format_real(ds.features(r, static_cast<Eigen::Index>(k))) << ',';
        out << format_real(ds.targets[r]) << '\n';
    }
}

/// Writes through a temporary sibling file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place at '" + path.string() + "'");
    }
}

inline void save_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ostringstream out;
    write_csv(out, ds);
    write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------------------
// Column statistics
// ---------------------------------------------------------------------------

struct ColumnSummary {
    std::string name;
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation (n - 1); 0 for a single value
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Quantile by linear interpolation between order statistics: position p * (n - 1).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sequence");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline ColumnSummary summarize_column(std::string name, std::span<const double> values) {
    if (values.empty()) throw DataError("cannot summarize an empty column");
    ColumnSummary s;
    s.name = std::move(name);
    s.count = values.size();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.std = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    return s;
}

inline std::vector<ColumnSummary> summarize_table(const CsvTable& table) {
    std::vector<ColumnSummary> out;
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
        std::vector<double> col(table.values.col(c).begin(), table.values.col(c).end());
        const auto idx = static_cast<std::size_t>(c);
        std::string name = idx < table.header.size() ? table.header[idx] : "col" + std::to_string(idx + 1);
        out.push_back(summarize_column(std::move(name), col));
    }
    return out;
}

} // namespace linboost
