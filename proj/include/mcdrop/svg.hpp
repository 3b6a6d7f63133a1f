#pragma once

#include <cstddef>
#include <string>

#include "mcdrop/text_format.hpp"

namespace mcdrop {

struct SvgOptions {
    std::size_t cell = 16;  // pixels per cell
    bool labels = true;     // draw header and row names when present
};

// One rectangle per table value, shaded on a light-to-dark blue ramp
// spanning the table's min..max. A constant table comes out uniform.
std::string render_svg(const CsvTable& table, const SvgOptions& options = {});

}  // namespace mcdrop
