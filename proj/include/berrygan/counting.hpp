#pragma once

#include <cstdint>
#include <vector>

#include "berrygan/image.hpp"

namespace berrygan {

// One 4-connected region of berry-class pixels together with the shape
// statistics the filter stages look at. Axis lengths follow the
// moments-equivalent-ellipse convention (full axes, not semi-axes), with
// the 1/12 per-pixel inertia term so a single pixel measures 1x1 instead
// of 0x0.
struct BerryComponent {
    std::vector<std::uint32_t> pixel_indices;  // row-major offsets into the mask
    int area = 0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    double minor_axis = 0.0;
    double major_axis = 0.0;
    double edge_coverage = 0.0;  // fraction of boundary pixels next to a berry-edge pixel
};

struct FilterConfig {
    bool min_area_enabled = true;
    int min_area = 25;  // components below this are artifacts, not berries
    bool axis_ratio_enabled = true;
    double min_axis_ratio = 0.3;
    bool area_ratio_enabled = true;
    double min_area_ratio = 0.5;  // observed area vs pi*r^2 from the mean axis
    bool edge_coverage_enabled = true;
    double min_edge_coverage = 0.5;

    static FilterConfig all_disabled() {
        FilterConfig f;
        f.min_area_enabled = false;
        f.axis_ratio_enabled = false;
        f.area_ratio_enabled = false;
        f.edge_coverage_enabled = false;
        return f;
    }
};

enum class RejectionReason : std::uint8_t {
    Accepted = 0,
    MinArea,
    AxisRatio,
    AreaVsExpected,
    EdgeCoverage,
};

struct ComponentRecord {
    BerryComponent component;
    RejectionReason rejection = RejectionReason::Accepted;
};

struct CountReport {
    int raw_component_count = 0;
    int accepted_count = 0;
    int rejected_min_area = 0;
    int rejected_axis_ratio = 0;
    int rejected_area_vs_expected = 0;
    int rejected_edge_coverage = 0;
    std::vector<ComponentRecord> components;

    int rejected_total() const {
        return rejected_min_area + rejected_axis_ratio + rejected_area_vs_expected +
               rejected_edge_coverage;
    }
};

// Connected components over berry-class pixels only, 4-connectivity;
// berry-edge and background both separate regions.
std::vector<BerryComponent> label_components(const BerryMask& mask);

// Filter stages run in order: min area, axis ratio, area vs expected,
// edge coverage; a component is charged to the first stage that drops it.
// Throws if the mask holds values outside {0,127,255}.
CountReport count_berries(const BerryMask& mask, const FilterConfig& filters = {});

struct BerryStat {
    int area = 0;
    double diameter = 0.0;  // 2*sqrt(area/pi)
};

// Per-berry area/diameter records over accepted components.
std::vector<BerryStat> berry_stats(const BerryMask& mask, const FilterConfig& filters = {});

}  // namespace berrygan
