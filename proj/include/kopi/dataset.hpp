#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kopi/core.hpp"

namespace kopi::io {

/// Shortest decimal text that reads back to exactly `value`.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

struct Dataset {
    Matrix X;
    Vector y;
    // Feature names in column order (header minus the response column).
    std::vector<std::string> names;
    // Means removed from X and y by centering.
    Vector x_means;
    double y_mean = 0.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

} // namespace detail

/// Parse a CSV table with a header row. One column must be named `response`;
/// every other column is a numeric feature. X and y are returned centered.
/// Rows and columns in error messages are 1-based, counting the header as row 1.
inline Dataset parse_dataset(std::istream& in, const std::string& source = "<input>",
                             const std::string& response = "y") {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::trim(line).empty()) return true;
        }
        return false;
    };
    require(next_line(), ErrorKind::parse, source + ": empty file (no header)");
    const auto header = detail::split_commas(line);
    std::ptrdiff_t y_col = -1;
    Dataset data;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == response) {
            require(y_col < 0, ErrorKind::parse, source + ": duplicate response column '" + response + "'");
            y_col = static_cast<std::ptrdiff_t>(c);
        } else {
            data.names.emplace_back(header[c]);
        }
    }
    require(y_col >= 0, ErrorKind::parse, source + ": no column named '" + response + "'");
    require(!data.names.empty(), ErrorKind::parse, source + ": no feature columns");

    std::vector<double> x_values, y_values;
    while (next_line()) {
        const auto cells = detail::split_commas(line);
        require(cells.size() == header.size(), ErrorKind::parse,
                source + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                    " fields, header has " + std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            require(detail::parse_double(cells[c], v), ErrorKind::parse,
                    source + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " ('" +
                        std::string(header[c]) + "'): not a finite number: '" + std::string(cells[c]) + "'");
            (static_cast<std::ptrdiff_t>(c) == y_col ? y_values : x_values).push_back(v);
        }
    }
    require(!y_values.empty(), ErrorKind::parse, source + ": dataset has a header but no rows");

    const auto n = static_cast<Eigen::Index>(y_values.size());
    const auto p = static_cast<Eigen::Index>(data.names.size());
    data.X = Eigen::Map<const RowMatrix>(x_values.data(), n, p);
    data.y = Eigen::Map<const Vector>(y_values.data(), n);
    data.x_means = center_columns(data.X);
    data.y_mean = data.y.mean();
    data.y.array() -= data.y_mean;
    return data;
}

inline Dataset load_dataset(const std::filesystem::path& path, const std::string& response = "y") {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open dataset " + path.string());
    return parse_dataset(in, path.string(), response);
}

inline void write_dataset_csv(std::ostream& out, const Matrix& X, const Vector& y) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) out << format_double(X(i, j)) << ',';
        out << format_double(y(i)) << '\n';
    }
}

/// Support indices, 1-based to match the x1..xp column names, one per line.
inline void write_support(std::ostream& out, const IndexSet& support) {
    for (const auto j : support) out << (j + 1) << '\n';
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out << content;
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace kopi::io
