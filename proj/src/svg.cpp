#include "mcdrop/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mcdrop/errors.hpp"

namespace mcdrop {

namespace {

std::string shade(double t) {
    constexpr std::array<int, 3> lo{0xf7, 0xfb, 0xff};
    constexpr std::array<int, 3> hi{0x08, 0x30, 0x6b};
    char buf[8];
    int c[3];
    for (int i = 0; i < 3; ++i) {
        c[i] = static_cast<int>(std::lround(lo[i] + t * (hi[i] - lo[i])));
    }
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += ch;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const CsvTable& table, const SvgOptions& options) {
    const Matrix& v = table.values;
    if (v.empty()) {
        throw FormatError("render: empty table");
    }
    if (!all_finite(v.values())) {
        throw FormatError("render: table holds non-finite values");
    }
    const auto [min_it, max_it] = std::minmax_element(v.values().begin(), v.values().end());
    const double lo = *min_it;
    const double span = *max_it - lo;

    const std::size_t cell = std::max<std::size_t>(options.cell, 1);
    const bool row_labels = options.labels && !table.row_names.empty();
    const bool col_labels = options.labels && !table.header.empty();
    const std::size_t left = row_labels ? 8 * cell : 0;
    const std::size_t top = col_labels ? 2 * cell : 0;
    const std::size_t width = left + v.cols() * cell;
    const std::size_t height = top + v.rows() * cell;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" shape-rendering=\"crispEdges\">\n";
    if (col_labels) {
        const std::size_t first = table.row_names.empty() ? 0 : 1;
        for (std::size_t c = 0; c < v.cols() && first + c < table.header.size(); ++c) {
            svg << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top - cell / 2
                << "\" font-size=\"" << std::max<std::size_t>(cell / 2, 1)
                << "\" text-anchor=\"middle\">" << escape(table.header[first + c]) << "</text>\n";
        }
    }
    for (std::size_t r = 0; r < v.rows(); ++r) {
        if (row_labels) {
            svg << "<text x=\"" << left - 2 << "\" y=\"" << top + r * cell + (3 * cell) / 4 << "\" font-size=\""
                << std::max<std::size_t>(cell / 2, 1) << "\" text-anchor=\"end\">" << escape(table.row_names[r])
                << "</text>\n";
        }
        for (std::size_t c = 0; c < v.cols(); ++c) {
            const double t = span > 0.0 ? (v(r, c) - lo) / span : 0.0;
            svg << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << shade(t) << "\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace mcdrop
