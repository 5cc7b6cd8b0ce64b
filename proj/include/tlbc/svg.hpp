#pragma once

#include <string>
#include <vector>

namespace tlbc {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
};

/// Static SVG line chart with linear axes and a legend. Non-finite points
/// break the polyline.
[[nodiscard]] std::string render_svg(const LineChart& chart);

}  // namespace tlbc
