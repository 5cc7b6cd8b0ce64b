#include "tlbc/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace tlbc {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 450.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                             "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    void pad() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        } else if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

}  // namespace

std::string render_svg(const LineChart& chart) {
    Range xr;
    Range yr;
    for (const auto& s : chart.series) {
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (std::isfinite(s.x[k]) && std::isfinite(s.y[k])) {
                xr.add(s.x[k]);
                yr.add(s.y[k]);
            }
        }
    }
    xr.pad();
    const double margin = 0.05 * (yr.hi - yr.lo);
    yr.lo -= margin;
    yr.hi += margin;
    yr.pad();

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, kHeight);
    out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       kLeft + pw / 2, escape(chart.title));

    // Axes and ticks.
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
                       kLeft, kTop, pw, ph);
    for (int i = 0; i <= 5; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
        out += fmt::format(
            "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#ddd\"/>"
            "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
            px(fx), kTop, kTop + ph, kTop + ph + 16, fx);
        out += fmt::format(
            "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>"
            "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
            kLeft, py(fy), kLeft + pw, kLeft - 6, py(fy) + 4, fy);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                       kHeight - 12, escape(chart.x_label));
    out += fmt::format(
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        kTop + ph / 2, escape(chart.y_label));

    for (std::size_t i = 0; i < chart.series.size(); ++i) {
        const auto& s = chart.series[i];
        const char* color = kColors[i % kColors.size()];
        std::string points;
        auto flush = [&] {
            if (!points.empty()) {
                out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
                                   color, points);
                points.clear();
            }
        };
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
                flush();
                continue;
            }
            points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", px(s.x[k]), py(s.y[k]));
        }
        flush();
        const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
        out += fmt::format(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
            "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
            kLeft + pw + 10, ly, kLeft + pw + 30, color, kLeft + pw + 36, ly + 4, escape(s.label));
    }
    out += "</svg>\n";
    return out;
}

}  // namespace tlbc
