#include "berrygan/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace berrygan {
namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 56;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    double px0 = 0.0, px1 = 1.0;

    double to_px(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

void pad_range(double& lo, double& hi) {
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
}

std::ofstream open_svg(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out;
}

void draw_frame(std::ofstream& out, const std::string& title, const std::string& xlabel,
                const std::string& ylabel) {
    out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
        << kWidth - kMarginLeft - kMarginRight << "\" height=\"" << kHeight - kMarginTop - kMarginBottom
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
        << "font-family=\"sans-serif\">" << escape(title) << "</text>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(xlabel)
        << "</text>\n";
    if (!ylabel.empty())
        out << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
            << "font-family=\"sans-serif\" transform=\"rotate(-90 16 " << kHeight / 2 << ")\">"
            << escape(ylabel) << "</text>\n";
}

void draw_ticks(std::ofstream& out, const Axis& x, const Axis& y) {
    for (int i = 0; i <= 5; ++i) {
        double vx = x.lo + (x.hi - x.lo) * i / 5.0;
        double px = x.to_px(vx);
        out << "<line x1=\"" << fmt(px) << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\"" << fmt(px)
            << "\" y2=\"" << kHeight - kMarginBottom + 5 << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << fmt(px) << "\" y=\"" << kHeight - kMarginBottom + 18
            << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(vx)
            << "</text>\n";
        double vy = y.lo + (y.hi - y.lo) * i / 5.0;
        double py = y.to_px(vy);
        out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << fmt(py) << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << fmt(py) << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << fmt(py + 3)
            << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(vy)
            << "</text>\n";
    }
}

}  // namespace

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<ScatterSeries>& series, bool identity_line,
                       const std::vector<LineSpec>& lines) {
    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (const ScatterSeries& s : series) {
        for (auto [px, py] : s.points) {
            if (!any) {
                lo = std::min(px, py);
                hi = std::max(px, py);
                any = true;
            } else {
                lo = std::min({lo, px, py});
                hi = std::max({hi, px, py});
            }
        }
    }
    pad_range(lo, hi);

    Axis x{lo, hi, static_cast<double>(kMarginLeft), static_cast<double>(kWidth - kMarginRight)};
    Axis y{lo, hi, static_cast<double>(kHeight - kMarginBottom), static_cast<double>(kMarginTop)};

    std::ofstream out = open_svg(path);
    draw_frame(out, title, xlabel, ylabel);
    draw_ticks(out, x, y);

    if (identity_line)
        out << "<line x1=\"" << fmt(x.to_px(lo)) << "\" y1=\"" << fmt(y.to_px(lo)) << "\" x2=\""
            << fmt(x.to_px(hi)) << "\" y2=\"" << fmt(y.to_px(hi))
            << "\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n";

    for (const LineSpec& ln : lines) {
        double y0 = ln.slope * lo + ln.intercept;
        double y1 = ln.slope * hi + ln.intercept;
        out << "<line x1=\"" << fmt(x.to_px(lo)) << "\" y1=\"" << fmt(y.to_px(y0)) << "\" x2=\""
            << fmt(x.to_px(hi)) << "\" y2=\"" << fmt(y.to_px(y1)) << "\" stroke=\"" << ln.color
            << "\"/>\n";
    }

    for (const ScatterSeries& s : series)
        for (auto [px, py] : s.points)
            out << "<circle cx=\"" << fmt(x.to_px(px)) << "\" cy=\"" << fmt(y.to_px(py))
                << "\" r=\"3\" fill=\"" << s.color << "\" fill-opacity=\"0.7\"/>\n";

    int legend_y = kMarginTop + 14;
    for (const ScatterSeries& s : series) {
        out << "<circle cx=\"" << kMarginLeft + 12 << "\" cy=\"" << legend_y - 4 << "\" r=\"4\" fill=\""
            << s.color << "\"/>\n";
        out << "<text x=\"" << kMarginLeft + 22 << "\" y=\"" << legend_y
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(s.name) << "</text>\n";
        legend_y += 16;
    }
    for (const LineSpec& ln : lines) {
        out << "<line x1=\"" << kMarginLeft + 6 << "\" y1=\"" << legend_y - 4 << "\" x2=\""
            << kMarginLeft + 18 << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << ln.color << "\"/>\n";
        out << "<text x=\"" << kMarginLeft + 22 << "\" y=\"" << legend_y
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(ln.name) << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::vector<std::string>& bin_labels,
                         const std::vector<HistogramSeries>& series) {
    std::size_t bins = bin_labels.size();
    for (const HistogramSeries& s : series)
        if (s.heights.size() != bins) throw std::invalid_argument("histogram: series/bin size mismatch");

    double hmax = 1.0;
    for (const HistogramSeries& s : series)
        for (double v : s.heights) hmax = std::max(hmax, v);

    Axis y{0.0, hmax * 1.05, static_cast<double>(kHeight - kMarginBottom), static_cast<double>(kMarginTop)};

    std::ofstream out = open_svg(path);
    draw_frame(out, title, xlabel, "count");

    double plot_w = kWidth - kMarginLeft - kMarginRight;
    double group_w = bins > 0 ? plot_w / static_cast<double>(bins) : plot_w;
    double bar_w = series.empty() ? group_w : group_w * 0.8 / static_cast<double>(series.size());

    for (int i = 0; i <= 5; ++i) {
        double vy = hmax * 1.05 * i / 5.0;
        double py = y.to_px(vy);
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << fmt(py + 3)
            << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(vy)
            << "</text>\n";
    }

    for (std::size_t b = 0; b < bins; ++b) {
        double gx = kMarginLeft + group_w * static_cast<double>(b) + group_w * 0.1;
        for (std::size_t si = 0; si < series.size(); ++si) {
            double v = series[si].heights[b];
            double top = y.to_px(v);
            double bottom = y.to_px(0.0);
            out << "<rect x=\"" << fmt(gx + bar_w * static_cast<double>(si)) << "\" y=\"" << fmt(top)
                << "\" width=\"" << fmt(bar_w) << "\" height=\"" << fmt(bottom - top) << "\" fill=\""
                << series[si].color << "\"/>\n";
        }
        // label every bin when few, else every fourth
        if (bins <= 16 || b % 4 == 0) {
            out << "<text x=\"" << fmt(gx + group_w * 0.4) << "\" y=\"" << kHeight - kMarginBottom + 18
                << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">"
                << escape(bin_labels[b]) << "</text>\n";
        }
    }

    int legend_y = kMarginTop + 14;
    for (const HistogramSeries& s : series) {
        out << "<rect x=\"" << kMarginLeft + 6 << "\" y=\"" << legend_y - 10
            << "\" width=\"12\" height=\"10\" fill=\"" << s.color << "\"/>\n";
        out << "<text x=\"" << kMarginLeft + 22 << "\" y=\"" << legend_y
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(s.name) << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
}

}  // namespace berrygan
