#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/detail/csv.hpp"
#include "cra/matrix.hpp"

namespace cra {

struct SeriesTable {
    Matrix values;                    // rows = time, columns = series
    std::vector<std::string> labels;  // one per column
    int dropped_rows = 0;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.push_back("");
    return cells;
}

inline std::string trimmed(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

inline bool is_missing_cell(const std::string& cell) {
    std::string t = trimmed(cell);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return t.empty() || t == "na" || t == "nan" || t == "null";
}

}  // namespace detail

// Header row of labels, numeric body, comma delimiter. Rows containing any
// missing cell are dropped and counted; malformed numbers are hard errors.
inline SeriesTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();

    SeriesTable table;
    for (const std::string& cell : detail::split_csv_line(line))
        table.labels.push_back(detail::trimmed(cell));
    const std::size_t width = table.labels.size();
    if (width == 0)
        throw std::runtime_error("load_csv: no columns in " + path);

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (detail::trimmed(line).empty())
            continue;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != width)
            throw std::runtime_error("load_csv: row " + std::to_string(line_no) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(width));
        bool missing = false;
        std::vector<double> parsed(width);
        for (std::size_t c = 0; c < width; ++c) {
            if (detail::is_missing_cell(cells[c])) {
                missing = true;
                break;
            }
            const std::string t = detail::trimmed(cells[c]);
            char* end = nullptr;
            parsed[c] = std::strtod(t.c_str(), &end);
            if (end == t.c_str() || *end != '\0')
                throw std::runtime_error("load_csv: non-numeric cell at row " +
                                         std::to_string(line_no) + ", column " +
                                         std::to_string(c + 1) + ": '" + t + "'");
        }
        if (missing) {
            ++table.dropped_rows;
            continue;
        }
        rows.push_back(std::move(parsed));
    }
    if (rows.size() < 2)
        throw std::runtime_error("load_csv: fewer than 2 complete rows in " + path);
    if (table.dropped_rows > 0)
        std::cerr << "load_csv: warning: dropped " << table.dropped_rows
                  << " incomplete row(s) from " << path << "\n";

    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c)
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rows[r][c];
    return table;
}

inline std::string series_to_csv(const Matrix& values,
                                 const std::vector<std::string>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != values.cols())
        throw std::invalid_argument("series_to_csv: label count mismatch");
    detail::CsvTable csv;
    csv.header = labels;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(labels.size());
        for (Eigen::Index c = 0; c < values.cols(); ++c)
            row.push_back(detail::format_double(values(r, c)));
        csv.rows.push_back(std::move(row));
    }
    return csv.to_string();
}

enum class DetrendMode { none, mean_only, linear };

struct PreprocessedSeries {
    Matrix values;
    std::vector<std::string> labels;
    std::vector<Eigen::Index> dropped_columns;  // pure-trend columns
};

// Removes each column's least-squares linear trend and rescales it to norm
// sqrt(n). Columns that are pure trend vanish after detrending and are
// dropped rather than divided by zero.
inline PreprocessedSeries preprocess(const SeriesTable& table,
                                     DetrendMode mode = DetrendMode::linear) {
    const Eigen::Index n = table.n();
    if (n < 3)
        throw std::invalid_argument("preprocess: need at least 3 observations");

    Vector t(n);
    for (Eigen::Index i = 0; i < n; ++i)
        t(i) = static_cast<double>(i);
    const Vector tc = t.array() - t.mean();
    const double tc_sq = tc.squaredNorm();

    PreprocessedSeries out;
    std::vector<Vector> kept;
    for (Eigen::Index c = 0; c < table.p(); ++c) {
        Vector col = table.values.col(c);
        if (mode != DetrendMode::none) {
            col.array() -= col.mean();
            if (mode == DetrendMode::linear)
                col -= (tc.dot(col) / tc_sq) * tc;
        }
        const double norm = col.norm();
        if (norm <= 1e-12) {
            out.dropped_columns.push_back(c);
            continue;
        }
        kept.push_back(col * (std::sqrt(static_cast<double>(n)) / norm));
        out.labels.push_back(c < static_cast<Eigen::Index>(table.labels.size())
                                 ? table.labels[static_cast<std::size_t>(c)]
                                 : std::string());
    }
    if (kept.empty())
        throw std::runtime_error("preprocess: every column vanished after detrending");
    if (!out.dropped_columns.empty())
        std::cerr << "preprocess: warning: dropped " << out.dropped_columns.size()
                  << " pure-trend column(s)\n";

    out.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c)
        out.values.col(static_cast<Eigen::Index>(c)) = kept[c];
    return out;
}

}  // namespace cra
