#pragma once

// Small standalone SVG line-chart writer shared by the ROC and spectrum
// plots. The data-to-pixel mapping is the exposed affine transform below so
// plot placement is testable.

#include <filesystem>
#include <string>
#include <vector>

namespace bump::svgplot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotLayout {
    double width = 800;
    double height = 500;
    double margin = 60;
    double x_min = 0, x_max = 1;
    double y_min = 0, y_max = 1;

    double px_of(double x) const {
        return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
    }
    double py_of(double y) const {
        return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
    }
};

// Layout whose data ranges span all series (degenerate ranges padded).
PlotLayout layout_for(const std::vector<Series>& series, double width = 800,
                      double height = 500, double margin = 60);

// One polyline element per series, axes with ticks and labels, legend when
// more than one series is named. Well-formed XML with escaped text.
std::string render_line_chart(const std::vector<Series>& series,
                              const PlotLayout& layout, const std::string& title,
                              const std::string& x_label, const std::string& y_label);

void write_line_chart(const std::vector<Series>& series, const PlotLayout& layout,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::filesystem::path& path);

}  // namespace bump::svgplot
