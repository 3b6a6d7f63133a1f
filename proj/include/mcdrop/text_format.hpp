#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mcdrop/math_core.hpp"

namespace mcdrop {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
bool parse_double(std::string_view text, double& out);

// Numeric table with a header row and optional leading row-name column.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::string> row_names;  // empty when the table has no name column
    Matrix values;
};

void write_table(const CsvTable& table, const std::filesystem::path& path);
std::string table_to_string(const CsvTable& table);
// Parses a table. The first column holds row names when its data cells are
// not numeric, or when the header is a text corner cell followed by numeric
// column labels (grid fields).
CsvTable parse_table(std::string_view text);
CsvTable read_table(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace mcdrop
