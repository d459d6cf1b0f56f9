#include "berrygan/counting.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace berrygan {

namespace {

void compute_shape(const BerryMask& mask, BerryComponent& comp) {
    const int w = mask.width;
    double sx = 0.0, sy = 0.0;
    for (std::uint32_t idx : comp.pixel_indices) {
        sx += idx % w;
        sy += idx / w;
    }
    const double n = static_cast<double>(comp.area);
    const double cx = sx / n, cy = sy / n;
    comp.centroid_x = cx;
    comp.centroid_y = cy;

    double mxx = 0.0, myy = 0.0, mxy = 0.0;
    for (std::uint32_t idx : comp.pixel_indices) {
        const double dx = idx % w - cx;
        const double dy = idx / w - cy;
        mxx += dx * dx;
        myy += dy * dy;
        mxy += dx * dy;
    }
    // Second central moments of the pixel set, each pixel treated as a unit
    // square (the 1/12 term).
    mxx = mxx / n + 1.0 / 12.0;
    myy = myy / n + 1.0 / 12.0;
    mxy = mxy / n;

    const double tr = mxx + myy;
    const double det = std::sqrt((mxx - myy) * (mxx - myy) + 4.0 * mxy * mxy);
    const double l1 = (tr + det) / 2.0;
    const double l2 = (tr - det) / 2.0;
    comp.major_axis = 4.0 * std::sqrt(std::max(l1, 0.0));
    comp.minor_axis = 4.0 * std::sqrt(std::max(l2, 0.0));

    // Boundary pixel: berry pixel with a 4-neighbour that is not berry
    // (image border counts). Covered: some 8-neighbour is berry-edge.
    int boundary = 0, covered = 0;
    const int h = mask.height;
    for (std::uint32_t idx : comp.pixel_indices) {
        const int x = idx % w, y = idx / w;
        bool is_boundary = false;
        static constexpr int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (auto& d : d4) {
            const int nx = x + d[0], ny = y + d[1];
            if (!mask.in_bounds(nx, ny) || mask.at(nx, ny) != kBerry) {
                is_boundary = true;
                break;
            }
        }
        if (!is_boundary) continue;
        ++boundary;
        bool near_edge = false;
        for (int dy = -1; dy <= 1 && !near_edge; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (mask.in_bounds(nx, ny) && mask.at(nx, ny) == kBerryEdge) {
                    near_edge = true;
                    break;
                }
            }
        if (near_edge) ++covered;
    }
    comp.edge_coverage = boundary > 0 ? static_cast<double>(covered) / boundary : 0.0;
}

}  // namespace

std::vector<BerryComponent> label_components(const BerryMask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<BerryComponent> components;
    std::vector<std::uint8_t> visited(mask.size(), 0);
    std::vector<std::uint32_t> stack;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint32_t start = static_cast<std::uint32_t>(y) * w + x;
            if (visited[start] || mask.pixels[start] != kBerry) continue;

            BerryComponent comp;
            stack.clear();
            stack.push_back(start);
            visited[start] = 1;
            while (!stack.empty()) {
                const std::uint32_t idx = stack.back();
                stack.pop_back();
                comp.pixel_indices.push_back(idx);
                const int cx = idx % w, cy = idx / w;
                static constexpr int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (auto& d : d4) {
                    const int nx = cx + d[0], ny = cy + d[1];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const std::uint32_t nidx = static_cast<std::uint32_t>(ny) * w + nx;
                    if (!visited[nidx] && mask.pixels[nidx] == kBerry) {
                        visited[nidx] = 1;
                        stack.push_back(nidx);
                    }
                }
            }
            comp.area = static_cast<int>(comp.pixel_indices.size());
            compute_shape(mask, comp);
            components.push_back(std::move(comp));
        }
    }
    return components;
}

CountReport count_berries(const BerryMask& mask, const FilterConfig& filters) {
    if (!mask.is_quantized())
        throw std::invalid_argument("count_berries: mask is not quantized to {0,127,255}");

    CountReport report;
    auto components = label_components(mask);
    report.raw_component_count = static_cast<int>(components.size());

    for (auto& comp : components) {
        RejectionReason reason = RejectionReason::Accepted;
        if (filters.min_area_enabled && comp.area < filters.min_area) {
            reason = RejectionReason::MinArea;
        } else if (filters.axis_ratio_enabled &&
                   (comp.major_axis <= 0.0 ||
                    comp.minor_axis / comp.major_axis < filters.min_axis_ratio)) {
            reason = RejectionReason::AxisRatio;
        } else if (filters.area_ratio_enabled) {
            const double r = (comp.minor_axis + comp.major_axis) / 4.0;
            const double expected = std::numbers::pi * r * r;
            if (expected <= 0.0 || comp.area / expected < filters.min_area_ratio)
                reason = RejectionReason::AreaVsExpected;
        }
        if (reason == RejectionReason::Accepted && filters.edge_coverage_enabled &&
            comp.edge_coverage < filters.min_edge_coverage)
            reason = RejectionReason::EdgeCoverage;

        switch (reason) {
            case RejectionReason::Accepted: ++report.accepted_count; break;
            case RejectionReason::MinArea: ++report.rejected_min_area; break;
            case RejectionReason::AxisRatio: ++report.rejected_axis_ratio; break;
            case RejectionReason::AreaVsExpected: ++report.rejected_area_vs_expected; break;
            case RejectionReason::EdgeCoverage: ++report.rejected_edge_coverage; break;
        }
        report.components.push_back({std::move(comp), reason});
    }
    return report;
}

std::vector<BerryStat> berry_stats(const BerryMask& mask, const FilterConfig& filters) {
    auto report = count_berries(mask, filters);
    std::vector<BerryStat> stats;
    stats.reserve(report.accepted_count);
    for (const auto& rec : report.components) {
        if (rec.rejection != RejectionReason::Accepted) continue;
        BerryStat s;
        s.area = rec.component.area;
        s.diameter = 2.0 * std::sqrt(s.area / std::numbers::pi);
        stats.push_back(s);
    }
    return stats;
}

}  // namespace berrygan
