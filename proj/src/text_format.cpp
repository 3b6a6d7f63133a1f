#include "mcdrop/text_format.hpp"

#include <array>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mcdrop/errors.hpp"

namespace mcdrop {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) {
        throw FormatError("format_double: conversion failed");
    }
    return std::string(buf.data(), ptr);
}

bool parse_double(std::string_view text, double& out) {
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string table_to_string(const CsvTable& table) {
    std::ostringstream out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        out << (i ? "," : "") << table.header[i];
    }
    out << '\n';
    for (std::size_t r = 0; r < table.values.rows(); ++r) {
        bool first = true;
        if (!table.row_names.empty()) {
            out << table.row_names[r];
            first = false;
        }
        for (double v : table.values.row(r)) {
            out << (first ? "" : ",") << format_double(v);
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

void write_table(const CsvTable& table, const std::filesystem::path& path) {
    write_file(path, table_to_string(table));
}

CsvTable parse_table(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    if (rows.size() < 2) {
        throw FormatError("table: need a header and at least one data row");
    }
    CsvTable table;
    table.header = rows.front();
    const std::size_t width = table.header.size();
    double probe = 0.0;
    bool numeric_header = table.header.size() > 1 && !parse_double(table.header.front(), probe);
    for (std::size_t c = 1; c < table.header.size() && numeric_header; ++c) {
        numeric_header = parse_double(table.header[c], probe);
    }
    const bool named = numeric_header || !parse_double(rows[1].front(), probe);
    const std::size_t cols = named ? width - 1 : width;
    if (cols == 0) {
        throw FormatError("table: no numeric columns");
    }
    std::vector<double> values;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw FormatError("table: line " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                              " cells, expected " + std::to_string(width));
        }
        std::size_t c0 = 0;
        if (named) {
            table.row_names.push_back(rows[r][0]);
            c0 = 1;
        }
        for (std::size_t c = c0; c < width; ++c) {
            double v = 0.0;
            if (!parse_double(rows[r][c], v)) {
                throw FormatError("table: line " + std::to_string(r + 1) + ": non-numeric cell `" + rows[r][c] +
                                  "`");
            }
            values.push_back(v);
        }
    }
    table.values = Matrix(rows.size() - 1, cols, std::move(values));
    return table;
}

CsvTable read_table(const std::filesystem::path& path) {
    return parse_table(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mcdrop
