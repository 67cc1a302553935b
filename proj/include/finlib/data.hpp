#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "finlib/tensor.hpp"

namespace finlib {

struct TableSchema {
    std::string time_column = "Date";
    std::vector<std::string> feature_columns;
    std::string target_column;
    char delimiter = ',';
    // Rows with unparseable values are dropped; error out when more than
    // this fraction of data rows is lost.
    double max_dropped_fraction = 0.25;
};

// Date-indexed feature table, sorted by time, gap rows removed.
struct TimeSeriesTable {
    std::vector<std::string> time_index;           // sorted ascending
    std::vector<std::vector<double>> features;     // [row][feature]
    std::vector<double> target;
    std::vector<std::string> feature_names;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;

    std::size_t rows() const { return target.size(); }
    std::size_t feature_count() const { return feature_names.size(); }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return pos == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace detail

// Parses a delimited text file with a header row, keeps only the configured
// columns, drops rows with gaps and sorts by the time column (string order,
// which is chronological for ISO dates and plain numeric indexes of equal
// width).
inline TimeSeriesTable load_table(const std::string& path, const TableSchema& schema) {
    if (schema.feature_columns.empty()) throw std::invalid_argument("schema needs feature columns");
    if (schema.target_column.empty()) throw std::invalid_argument("schema needs a target column");
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);

    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("dataset is empty: " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto columns = detail::split_line(header, schema.delimiter);

    auto column_index = [&](const std::string& name) {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            throw std::runtime_error("dataset is missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - columns.begin());
    };

    const std::size_t time_idx = column_index(schema.time_column);
    std::vector<std::size_t> feat_idx;
    for (const auto& f : schema.feature_columns) feat_idx.push_back(column_index(f));
    const std::size_t target_idx = column_index(schema.target_column);

    struct Row {
        std::string time;
        std::vector<double> feats;
        double target;
    };
    std::vector<Row> rows;
    std::size_t read = 0, dropped = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++read;
        const auto fields = detail::split_line(line, schema.delimiter);
        if (fields.size() != columns.size()) {
            ++dropped;
            continue;
        }
        Row r;
        r.time = fields[time_idx];
        bool ok = !r.time.empty() && detail::parse_double(fields[target_idx], r.target);
        for (std::size_t j : feat_idx) {
            double v = 0.0;
            ok = ok && detail::parse_double(fields[j], v);
            if (!ok) break;
            r.feats.push_back(v);
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("no usable rows in dataset: " + path);
    if (read > 0 && static_cast<double>(dropped) / static_cast<double>(read) > schema.max_dropped_fraction) {
        throw std::runtime_error("too many unparseable rows in dataset: " + path);
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });

    TimeSeriesTable table;
    table.feature_names = schema.feature_columns;
    table.rows_read = read;
    table.rows_dropped = dropped;
    for (auto& r : rows) {
        table.time_index.push_back(std::move(r.time));
        table.features.push_back(std::move(r.feats));
        table.target.push_back(r.target);
    }
    return table;
}

// One regression sample: the last `window` timesteps of every feature plus
// the next-step target.
struct WindowedSample {
    Tensor window;          // [window x F]
    double target = 0.0;
    std::size_t target_row = 0;
};

inline std::vector<WindowedSample> make_windows(const TimeSeriesTable& table,
                                                std::size_t window = 7,
                                                std::size_t horizon = 1) {
    if (window < 1 || horizon < 1) throw std::invalid_argument("window and horizon must be >= 1");
    const std::size_t n = table.rows();
    const std::size_t span = window + horizon - 1;
    if (n <= span) throw std::invalid_argument("table too short for the requested window");
    const std::size_t f = table.feature_count();
    std::vector<WindowedSample> out;
    out.reserve(n - span);
    for (std::size_t i = 0; i + span < n; ++i) {
        WindowedSample s;
        s.window = Tensor({window, f});
        for (std::size_t r = 0; r < window; ++r) {
            for (std::size_t c = 0; c < f; ++c) s.window.at(r, c) = table.features[i + r][c];
        }
        s.target_row = i + span;
        s.target = table.target[s.target_row];
        out.push_back(std::move(s));
    }
    return out;
}

// Chronological split: first floor(frac*N) samples train, the rest test.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> chrono_split(const std::vector<T>& samples,
                                                       double train_frac = 0.85) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0,1)");
    }
    const std::size_t n_train =
        static_cast<std::size_t>(train_frac * static_cast<double>(samples.size()));
    if (n_train == 0 || n_train == samples.size()) {
        throw std::invalid_argument("split leaves an empty side");
    }
    std::vector<T> train(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<T> test(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
    return {std::move(train), std::move(test)};
}

}  // namespace finlib
