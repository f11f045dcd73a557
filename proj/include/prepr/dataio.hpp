#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prepr/baselines.hpp"
#include "prepr/prepivot_test.hpp"
#include "prepr/rng.hpp"
#include "prepr/sample_matrix.hpp"

// Real-data entry points: delimited-text loading with label handling, the
// two-group test runner, and the random-partition null check (split one
// group's rows into two halves at random; a calibrated test should reject
// at about its nominal level).

namespace prepr {

inline constexpr std::uint64_t kStreamDataPartition = 0xC0FFEE04;

struct LabeledDataset {
    SampleMatrix data;                        // rows are samples
    std::vector<std::string> group_labels;    // one per row; may be empty
    std::vector<std::string> variable_names;  // one per column
};

enum class Orientation { SamplesInRows, VariablesInRows };

struct LoadOptions {
    Orientation orientation = Orientation::SamplesInRows;
    // Label sources, mutually exclusive. label_column names a column of the
    // file itself (header name, or #k for 0-based position); label_file is a
    // separate file with one label per row.
    std::string label_column;
    std::string label_file;
    bool log_transform = false;  // natural log; every entry must be positive
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::size_t parse_size(const std::string& s, const char* what) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw validation_error(std::string("cannot parse ") + what + " '" + s + "'");
    return value;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && std::isfinite(out);
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) pos = line.size();
        std::string f = line.substr(start, pos - start);
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t'))
            f.pop_back();
        std::size_t a = f.find_first_not_of(" \t");
        fields.push_back(a == std::string::npos ? "" : f.substr(a));
        start = pos + 1;
    }
    return fields;
}

inline std::set<std::size_t> non_numeric_fields(const std::vector<std::string>& fields) {
    std::set<std::size_t> out;
    double v;
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (!parse_double(fields[i], v)) out.insert(i);
    return out;
}

}  // namespace detail

// Reads a delimited text file (delimiter taken from the first line: tab if
// one is present, comma otherwise; header detected by comparing which fields
// of the first two lines fail numeric parsing).
inline LabeledDataset load_matrix(const std::string& path,
                                  const LoadOptions& opt = {}) {
    if (!opt.label_column.empty() && !opt.label_file.empty())
        throw validation_error("load_matrix: give a label column or a label file, not both");
    if (!opt.label_column.empty() && opt.orientation == Orientation::VariablesInRows)
        throw validation_error(
            "load_matrix: label columns apply to samples-in-rows files; use a "
            "label file for variables-in-rows data");

    std::ifstream in(path);
    if (!in) throw validation_error("load_matrix: cannot open '" + path + "'");

    std::vector<std::vector<std::string>> rows;
    std::string line;
    char delim = ',';
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            delim = line.find('\t') != std::string::npos ? '\t' : ',';
            first = false;
        }
        if (detail::trim_copy(line).empty()) continue;
        rows.push_back(detail::split_fields(line, delim));
    }
    if (rows.size() < 2)
        throw validation_error("load_matrix: '" + path + "' has fewer than 2 rows");
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].size() != rows[0].size())
            throw validation_error("load_matrix: line " + std::to_string(i + 1) +
                                   " has " + std::to_string(rows[i].size()) +
                                   " fields, expected " + std::to_string(rows[0].size()));

    const bool has_header =
        detail::non_numeric_fields(rows[0]) != detail::non_numeric_fields(rows[1]);
    std::vector<std::string> header;
    if (has_header) {
        header = rows[0];
        rows.erase(rows.begin());
        if (rows.size() < 2)
            throw validation_error("load_matrix: '" + path +
                                   "' has fewer than 2 data rows");
    }

    // In variables-in-rows files a leading non-numeric column holds variable
    // names; detect it the same way as labels (non-numeric everywhere).
    LabeledDataset ds;
    std::size_t name_col = SIZE_MAX;
    std::size_t label_col = SIZE_MAX;
    if (opt.orientation == Orientation::VariablesInRows) {
        double v;
        bool all_nonnum = true;
        for (const auto& r : rows)
            if (detail::parse_double(r[0], v)) { all_nonnum = false; break; }
        if (all_nonnum) name_col = 0;
    } else if (!opt.label_column.empty()) {
        if (opt.label_column[0] == '#') {
            label_col = detail::parse_size(opt.label_column.substr(1),
                                           "label column index");
        } else {
            if (!has_header)
                throw validation_error("load_matrix: label column '" + opt.label_column +
                                       "' named but the file has no header");
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == opt.label_column) { label_col = i; break; }
            if (label_col == SIZE_MAX)
                throw validation_error("load_matrix: no header field named '" +
                                       opt.label_column + "'");
        }
        if (label_col >= rows[0].size())
            throw validation_error("load_matrix: label column index out of range");
    }

    // Parse the numeric block.
    const std::size_t ncols = rows[0].size();
    std::vector<std::size_t> value_cols;
    for (std::size_t j = 0; j < ncols; ++j)
        if (j != label_col && j != name_col) value_cols.push_back(j);
    if (value_cols.empty())
        throw validation_error("load_matrix: no numeric columns left");

    const std::size_t header_offset = has_header ? 2 : 1;  // 1-based file lines
    std::vector<double> raw(rows.size() * value_cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t jj = 0; jj < value_cols.size(); ++jj) {
            const std::size_t j = value_cols[jj];
            double v;
            if (!detail::parse_double(rows[i][j], v))
                throw validation_error("load_matrix: non-numeric value '" + rows[i][j] +
                                       "' at line " + std::to_string(i + header_offset) +
                                       ", field " + std::to_string(j + 1));
            raw[jj * rows.size() + i] = v;  // column-major over the file view
        }

    if (opt.orientation == Orientation::SamplesInRows) {
        ds.data.n = rows.size();
        ds.data.p = value_cols.size();
        ds.data.values = std::move(raw);
        if (has_header)
            for (std::size_t jj = 0; jj < value_cols.size(); ++jj)
                ds.variable_names.push_back(header[value_cols[jj]]);
        if (label_col != SIZE_MAX)
            for (const auto& r : rows) ds.group_labels.push_back(r[label_col]);
    } else {
        // File rows are variables: transpose.
        ds.data = make_matrix(value_cols.size(), rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t jj = 0; jj < value_cols.size(); ++jj)
                ds.data.at(jj, i) = raw[jj * rows.size() + i];
        if (name_col != SIZE_MAX)
            for (const auto& r : rows) ds.variable_names.push_back(r[name_col]);
    }

    if (ds.variable_names.empty())
        for (std::size_t j = 0; j < ds.data.p; ++j)
            ds.variable_names.push_back("v" + std::to_string(j));

    if (!opt.label_file.empty()) {
        std::ifstream lf(opt.label_file);
        if (!lf)
            throw validation_error("load_matrix: cannot open label file '" +
                                   opt.label_file + "'");
        std::string lab;
        while (std::getline(lf, lab)) {
            const std::string t = detail::trim_copy(lab);
            if (!t.empty()) ds.group_labels.push_back(t);
        }
        if (ds.group_labels.size() != ds.data.n)
            throw validation_error("load_matrix: label file has " +
                                   std::to_string(ds.group_labels.size()) +
                                   " labels for " + std::to_string(ds.data.n) + " rows");
    }

    if (opt.log_transform) {
        for (std::size_t j = 0; j < ds.data.p; ++j)
            for (std::size_t i = 0; i < ds.data.n; ++i) {
                const double v = ds.data.at(i, j);
                if (!(v > 0.0))
                    throw validation_error(
                        "load_matrix: log transform needs positive entries; row " +
                        std::to_string(i) + ", variable '" + ds.variable_names[j] +
                        "' holds " + std::to_string(v));
                ds.data.at(i, j) = std::log(v);
            }
    }

    validate(ds.data);
    return ds;
}

// Writes samples-in-rows CSV with 17 significant digits, enough for doubles
// to survive a round trip exactly.
inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_dataset: cannot open '" + path + "' for writing");
    const bool labeled = !ds.group_labels.empty();
    if (labeled) out << "label";
    for (std::size_t j = 0; j < ds.data.p; ++j) {
        if (labeled || j) out << ',';
        out << ds.variable_names[j];
    }
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ds.data.n; ++i) {
        if (labeled) out << ds.group_labels[i];
        for (std::size_t j = 0; j < ds.data.p; ++j) {
            if (labeled || j) out << ',';
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), ds.data.at(i, j),
                                           std::chars_format::general, 17);
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
    if (!out) throw computation_error("save_dataset: write to '" + path + "' failed");
}

// Splits a two-group dataset into (first-encountered label, other label).
inline std::pair<SampleMatrix, SampleMatrix> split_groups(
    const LabeledDataset& ds, std::string* label1 = nullptr,
    std::string* label2 = nullptr) {
    if (ds.group_labels.size() != ds.data.n)
        throw validation_error("split_groups: dataset has no per-row labels");
    std::vector<std::string> distinct;
    for (const auto& l : ds.group_labels)
        if (std::find(distinct.begin(), distinct.end(), l) == distinct.end())
            distinct.push_back(l);
    if (distinct.size() != 2)
        throw validation_error("split_groups: expected exactly 2 distinct labels, found " +
                               std::to_string(distinct.size()));
    std::vector<std::size_t> idx1, idx2;
    for (std::size_t i = 0; i < ds.data.n; ++i)
        (ds.group_labels[i] == distinct[0] ? idx1 : idx2).push_back(i);
    if (idx1.size() < 2 || idx2.size() < 2)
        throw validation_error("split_groups: each group needs at least 2 rows");

    auto take = [&](const std::vector<std::size_t>& idx) {
        SampleMatrix M = make_matrix(idx.size(), ds.data.p);
        for (std::size_t j = 0; j < ds.data.p; ++j)
            for (std::size_t i = 0; i < idx.size(); ++i)
                M.at(i, j) = ds.data.at(idx[i], j);
        return M;
    };
    if (label1) *label1 = distinct[0];
    if (label2) *label2 = distinct[1];
    return {take(idx1), take(idx2)};
}

struct TwoSampleReport {
    std::string label1, label2;
    std::size_t n1 = 0, n2 = 0, p = 0;
    bool has_prepr = false;
    TestResult prepr;
    std::vector<BaselineResult> baselines;
};

inline TwoSampleReport two_sample_run(const LabeledDataset& ds,
                                      const std::vector<std::string>& tests,
                                      double alpha = 0.05,
                                      DegeneratePolicy policy = DegeneratePolicy::Strict) {
    if (tests.empty())
        throw validation_error("two_sample_run: test list must not be empty");
    TwoSampleReport rep;
    auto [X, Y] = split_groups(ds, &rep.label1, &rep.label2);
    rep.n1 = X.n;
    rep.n2 = Y.n;
    rep.p = X.p;
    for (const auto& t : tests) {
        if (t == "PREPR") {
            rep.prepr = run_test(X, Y, alpha, policy);
            rep.has_prepr = true;
        } else if (t == "BS") {
            rep.baselines.push_back(bs_test(X, Y, alpha));
        } else if (t == "CQ") {
            rep.baselines.push_back(cq_test(X, Y, alpha));
        } else if (t == "SD") {
            rep.baselines.push_back(sd_test(X, Y, alpha, policy));
        } else {
            throw validation_error("two_sample_run: unknown test '" + t + "'");
        }
    }
    return rep;
}

namespace detail {

// Shuffled index vector for partition replicate `rep`; pure function of
// (seed, rep), independent of the data.
inline std::vector<std::size_t> draw_partition(std::size_t n, std::uint64_t seed,
                                               std::uint64_t rep) {
    Stream st(derive_seed(seed, kStreamDataPartition, rep));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = st.bounded(i + 1);
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace detail

struct PartitionCheckResult {
    std::vector<std::string> tests;
    std::vector<std::size_t> rejections;  // aligned with tests
    std::size_t completed = 0;
    std::size_t failed = 0;

    double rate(std::size_t t) const {
        return completed ? static_cast<double>(rejections[t]) /
                               static_cast<double>(completed)
                         : 0.0;
    }
};

// Repeatedly splits the rows into random halves of sizes floor(n/2) and
// ceil(n/2) and records how often each test rejects. On homogeneous data
// the rates should sit near alpha. Degenerate variables are dropped
// (permissive), as real expression matrices routinely carry constant rows.
inline PartitionCheckResult partition_check(const SampleMatrix& data,
                                            std::size_t repetitions,
                                            const std::vector<std::string>& tests,
                                            double alpha = 0.05,
                                            std::uint64_t seed = 1) {
    validate(data);
    if (data.n < 4)
        throw validation_error("partition_check: need at least 4 rows to split");
    if (repetitions < 1)
        throw validation_error("partition_check: repetitions must be >= 1");
    if (tests.empty())
        throw validation_error("partition_check: test list must not be empty");
    for (const auto& t : tests)
        if (t != "PREPR" && t != "BS" && t != "SD" && t != "CQ")
            throw validation_error("partition_check: unknown test '" + t + "'");

    PartitionCheckResult res;
    res.tests = tests;
    res.rejections.assign(tests.size(), 0);

    const std::size_t half = data.n / 2;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const std::vector<std::size_t> idx = detail::draw_partition(data.n, seed, rep);
        SampleMatrix X = make_matrix(half, data.p);
        SampleMatrix Y = make_matrix(data.n - half, data.p);
        for (std::size_t j = 0; j < data.p; ++j) {
            for (std::size_t i = 0; i < half; ++i) X.at(i, j) = data.at(idx[i], j);
            for (std::size_t i = half; i < data.n; ++i)
                Y.at(i - half, j) = data.at(idx[i], j);
        }
        try {
            for (std::size_t t = 0; t < tests.size(); ++t) {
                bool reject;
                if (tests[t] == "PREPR")
                    reject = run_test(X, Y, alpha, DegeneratePolicy::Drop).reject;
                else if (tests[t] == "BS")
                    reject = bs_test(X, Y, alpha).reject;
                else if (tests[t] == "SD")
                    reject = sd_test(X, Y, alpha, DegeneratePolicy::Drop).reject;
                else
                    reject = cq_test(X, Y, alpha).reject;
                res.rejections[t] += reject ? 1 : 0;
            }
            ++res.completed;
        } catch (const computation_error&) {
            ++res.failed;
        }
    }
    return res;
}

}  // namespace prepr
