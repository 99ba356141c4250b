#include "bump/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "bump/errors.hpp"

namespace bump::svgplot {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

PlotLayout layout_for(const std::vector<Series>& series, double width, double height,
                      double margin) {
    PlotLayout layout;
    layout.width = width;
    layout.height = height;
    layout.margin = margin;
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -x_min, y_min = x_min, y_max = -x_min;
    bool any = false;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("cannot lay out a plot with no data");
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max == y_min) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    layout.x_min = x_min;
    layout.x_max = x_max;
    layout.y_min = y_min;
    layout.y_max = y_max;
    return layout;
}

std::string render_line_chart(const std::vector<Series>& series,
                              const PlotLayout& layout, const std::string& title,
                              const std::string& x_label, const std::string& y_label) {
    for (const auto& s : series)
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("series " + s.name + " has mismatched lengths");

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(layout.width) +
           "\" height=\"" + num(layout.height) + "\" viewBox=\"0 0 " +
           num(layout.width) + " " + num(layout.height) + "\">\n";
    svg += "<rect width=\"" + num(layout.width) + "\" height=\"" + num(layout.height) +
           "\" fill=\"white\"/>\n";

    const double x0 = layout.margin;
    const double x1 = layout.width - layout.margin;
    const double y0 = layout.height - layout.margin;
    const double y1 = layout.margin;

    svg += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y1 - 20) +
           "\" text-anchor=\"middle\" font-size=\"16\" font-family=\"sans-serif\">" +
           escape_xml(title) + "</text>\n";

    // Axes.
    svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) +
           "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) +
           "\" y2=\"" + num(y1) + "\" stroke=\"black\"/>\n";

    const int n_ticks = 5;
    for (int t = 0; t <= n_ticks; ++t) {
        const double fx =
            layout.x_min + (layout.x_max - layout.x_min) * t / double(n_ticks);
        const double px = layout.px_of(fx);
        svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(px) +
               "\" y2=\"" + num(y0 + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 20) +
               "\" text-anchor=\"middle\" font-size=\"11\" "
               "font-family=\"sans-serif\">" +
               escape_xml(num(fx)) + "</text>\n";

        const double fy =
            layout.y_min + (layout.y_max - layout.y_min) * t / double(n_ticks);
        const double py = layout.py_of(fy);
        svg += "<line x1=\"" + num(x0 - 5) + "\" y1=\"" + num(py) + "\" x2=\"" +
               num(x0) + "\" y2=\"" + num(py) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(py + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
               escape_xml(num(fy)) + "</text>\n";
    }

    svg += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y0 + 40) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" +
           escape_xml(x_label) + "</text>\n";
    svg += "<text x=\"" + num(x0 - 45) + "\" y=\"" + num((y0 + y1) / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 " +
           num(x0 - 45) + " " + num((y0 + y1) / 2) + ")\">" +
           escape_xml(y_label) + "</text>\n";

    std::size_t color = 0;
    for (const auto& s : series) {
        if (s.x.empty()) continue;
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) pts += " ";
            pts += num(layout.px_of(s.x[i])) + "," + num(layout.py_of(s.y[i]));
        }
        svg += "<polyline fill=\"none\" stroke=\"" +
               std::string(kPalette[color % 6]) + "\" stroke-width=\"1.5\" points=\"" +
               pts + "\"/>\n";
        ++color;
    }

    if (series.size() > 1) {
        double ly = y1 + 10;
        color = 0;
        for (const auto& s : series) {
            const std::string c = kPalette[color % 6];
            svg += "<line x1=\"" + num(x1 - 150) + "\" y1=\"" + num(ly) + "\" x2=\"" +
                   num(x1 - 120) + "\" y2=\"" + num(ly) + "\" stroke=\"" + c +
                   "\" stroke-width=\"1.5\"/>\n";
            svg += "<text x=\"" + num(x1 - 114) + "\" y=\"" + num(ly + 4) +
                   "\" font-size=\"11\" font-family=\"sans-serif\">" +
                   escape_xml(s.name) + "</text>\n";
            ly += 16;
            ++color;
        }
    }

    svg += "</svg>\n";
    return svg;
}

void write_line_chart(const std::vector<Series>& series, const PlotLayout& layout,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::filesystem::path& path) {
    const std::string svg = render_line_chart(series, layout, title, x_label, y_label);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << svg;
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace bump::svgplot
