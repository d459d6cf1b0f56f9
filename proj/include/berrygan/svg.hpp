#pragma once

#include <string>
#include <utility>
#include <vector>

namespace berrygan {

struct ScatterSeries {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

struct LineSpec {
    std::string name;
    std::string color;
    double slope = 1.0;
    double intercept = 0.0;
};

// Static plots for the report bundles; deterministic output bytes.
void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<ScatterSeries>& series, bool identity_line,
                       const std::vector<LineSpec>& lines);

struct HistogramSeries {
    std::string name;
    std::string color;
    std::vector<double> heights;  // one per bin
};

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::vector<std::string>& bin_labels,
                         const std::vector<HistogramSeries>& series);

}  // namespace berrygan
