#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normlab/errors.hpp"
#include "normlab/experiments/summary.hpp"

namespace normlab::io {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> std; ///< band half-width; empty for no band
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    /// Optional horizontal reference line (e.g. the ideal ratio 1).
    std::optional<double> reference;
};

/// One series per metric, x = layer_or_width, band = +-1 std.
inline Panel panel_from_table(const SummaryTable& table, const std::vector<std::string>& metrics, std::string title,
                              std::string x_label, std::string y_label)
{
    Panel panel{std::move(title), std::move(x_label), std::move(y_label), {}, std::nullopt};
    for (const auto& metric : metrics) {
        PlotSeries s{metric, {}, {}, {}};
        for (const auto& row : table.series(metric)) {
            s.x.push_back(static_cast<double>(row.layer_or_width));
            s.mean.push_back(row.mean);
            s.std.push_back(row.std);
        }
        panel.series.push_back(std::move(s));
    }
    return panel;
}

namespace svg_detail {

inline constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline constexpr double kPanelWidth = 520.0;
inline constexpr double kPanelHeight = 380.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 160.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 55.0;

inline std::string num(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

inline std::string tick_label(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buffer;
}

inline std::string escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
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
            out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    void pad()
    {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            const double margin = 0.05 * (hi - lo);
            lo -= margin;
            hi += margin;
        }
    }
};

inline std::vector<double> ticks(const Range& r)
{
    const double raw = (r.hi - r.lo) / 5.0;
    const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
    double step = magnitude;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        step = m * magnitude;
        if (step >= raw) {
            break;
        }
    }
    std::vector<double> out;
    for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) {
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return out;
}

} // namespace svg_detail

/// Static SVG with one plot per panel, laid out left to right: mean
/// polylines, +-1 std bands, axes with ticks, axis labels and a legend.
inline std::string render_svg(std::span<const Panel> panels)
{
    using namespace svg_detail;
    if (panels.empty()) {
        throw InvalidArgument("render_svg: nothing to plot");
    }
    for (const auto& panel : panels) {
        if (panel.series.empty()) {
            throw InvalidArgument("render_svg: panel '" + panel.title + "' has no series");
        }
        for (const auto& s : panel.series) {
            if (s.x.empty() || s.x.size() != s.mean.size() || (!s.std.empty() && s.std.size() != s.x.size())) {
                throw InvalidArgument("render_svg: series '" + s.name + "' is empty or ragged");
            }
        }
    }

    const double width = kPanelWidth * static_cast<double>(panels.size());
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                      num(kPanelHeight) + "\" viewBox=\"0 0 " + num(width) + " " + num(kPanelHeight) +
                      "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(kPanelHeight) + "\" fill=\"white\"/>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& panel = panels[p];
        const double x0 = kPanelWidth * static_cast<double>(p) + kLeft;
        const double x1 = kPanelWidth * static_cast<double>(p + 1) - kRight;
        const double y0 = kPanelHeight - kBottom;
        const double y1 = kTop;

        Range xr;
        Range yr;
        for (const auto& s : panel.series) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                xr.include(s.x[i]);
                const double sd = s.std.empty() ? 0.0 : s.std[i];
                yr.include(s.mean[i] - sd);
                yr.include(s.mean[i] + sd);
            }
        }
        if (panel.reference) {
            yr.include(*panel.reference);
        }
        if (xr.hi - xr.lo < 1e-12) {
            xr.pad();
        }
        yr.pad();
        auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
        auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };

        out += "<g class=\"panel\">\n";
        out += "<text x=\"" + num(0.5 * (x0 + x1)) + "\" y=\"" + num(y1 - 15.0) +
               "\" text-anchor=\"middle\" font-size=\"13\">" + escape(panel.title) + "</text>\n";
        out += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
               num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double t : ticks(yr)) {
            out += "<line class=\"ytick\" x1=\"" + num(x0 - 4.0) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(x0) +
                   "\" y2=\"" + num(py(t)) + "\" stroke=\"black\"/>\n";
            out += "<text x=\"" + num(x0 - 6.0) + "\" y=\"" + num(py(t) + 4.0) + "\" text-anchor=\"end\">" +
                   tick_label(t) + "</text>\n";
        }
        for (double t : ticks(xr)) {
            out += "<line class=\"xtick\" x1=\"" + num(px(t)) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(px(t)) +
                   "\" y2=\"" + num(y0 + 4.0) + "\" stroke=\"black\"/>\n";
            out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(y0 + 16.0) + "\" text-anchor=\"middle\">" +
                   tick_label(t) + "</text>\n";
        }
        out += "<text class=\"xlabel\" x=\"" + num(0.5 * (x0 + x1)) + "\" y=\"" + num(kPanelHeight - 15.0) +
               "\" text-anchor=\"middle\">" + escape(panel.x_label) + "</text>\n";
        out += "<text class=\"ylabel\" x=\"" + num(x0 - 50.0) + "\" y=\"" + num(0.5 * (y0 + y1)) +
               "\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(x0 - 50.0) + " " + num(0.5 * (y0 + y1)) +
               ")\">" + escape(panel.y_label) + "</text>\n";
        if (panel.reference) {
            out += "<line class=\"reference\" x1=\"" + num(x0) + "\" y1=\"" + num(py(*panel.reference)) + "\" x2=\"" +
                   num(x1) + "\" y2=\"" + num(py(*panel.reference)) +
                   "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
        }

        for (std::size_t k = 0; k < panel.series.size(); ++k) {
            const PlotSeries& s = panel.series[k];
            const char* color = kPalette[k % kPalette.size()];
            if (!s.std.empty()) {
                std::string points;
                for (std::size_t i = 0; i < s.x.size(); ++i) {
                    points += num(px(s.x[i])) + "," + num(py(s.mean[i] + s.std[i])) + " ";
                }
                for (std::size_t i = s.x.size(); i-- > 0;) {
                    points += num(px(s.x[i])) + "," + num(py(s.mean[i] - s.std[i])) + " ";
                }
                points.pop_back();
                out += "<polygon class=\"band\" points=\"" + points + "\" fill=\"" + color +
                       "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
            }
            std::string points;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                points += num(px(s.x[i])) + "," + num(py(s.mean[i])) + " ";
            }
            points.pop_back();
            out += "<polyline class=\"mean\" points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"/>\n";

            const double ly = y1 + 10.0 + 16.0 * static_cast<double>(k);
            out += "<rect class=\"legend\" x=\"" + num(x1 + 10.0) + "\" y=\"" + num(ly - 8.0) +
                   "\" width=\"12\" height=\"10\" fill=\"" + color + "\"/>\n";
            out += "<text x=\"" + num(x1 + 26.0) + "\" y=\"" + num(ly + 1.0) + "\">" + escape(s.name) + "</text>\n";
        }
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace normlab::io
