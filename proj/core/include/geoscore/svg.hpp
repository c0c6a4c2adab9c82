#pragma once

#include "geoscore/types.hpp"

#include <string>
#include <vector>

namespace geoscore {

struct SvgSeries {
    std::string label;
    Matrix points; // n x 2
    std::string color = "#1f4e9c";
    std::string marker = "circle"; // "circle" | "triangle" (scatter only)
};

struct SvgAxes {
    std::string title;
    std::string x_label;
    std::string y_label;
};

// Standalone SVG 1.1 documents, fixed 640x480 viewport, axis labels, legend.
void emit_svg_scatter(const std::vector<SvgSeries>& series, const SvgAxes& axes,
                      const std::string& path);
void emit_svg_lines(const std::vector<SvgSeries>& series, const SvgAxes& axes,
                    const std::string& path);

} // namespace geoscore
