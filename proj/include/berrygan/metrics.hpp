#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "berrygan/image.hpp"

namespace berrygan {

// Number of pixels of class c in a quantized mask.
std::int64_t area(const BerryMask& mask, MaskClass c);

// Intersection over union of class c between two masks of equal size.
// Defined as 1 when the class is absent from both.
double iou(const BerryMask& ref, const BerryMask& gen, MaskClass c);

// Pearson correlation over flattened pixel values. Empty when either
// input is constant (sigma would be zero) rather than a silent number.
std::optional<double> pearson_correlation(const std::vector<std::uint8_t>& a,
                                          const std::vector<std::uint8_t>& b);
std::optional<double> pearson_correlation(const detail::Grid8& a, const detail::Grid8& b);

struct RSquared {
    double r2 = 0.0;      // against the identity line: 1 - SS_res/SS_tot
    double slope = 0.0;   // least-squares line fitted to the predictions
    double intercept = 0.0;
};

// Counting agreement against the reference diagonal; the fitted line is
// reported separately for plot annotation. Throws on constant reference.
RSquared r_squared(const std::vector<double>& predicted, const std::vector<double>& reference);

enum class GenerationMapMode { ThreeClass, TwoClass };

// Per-pixel (reference class, generated class) categories. ThreeClass has
// the 9 ordered pairs; TwoClass merges berry-edge into berry first, giving 4.
struct GenerationMap {
    int width = 0;
    int height = 0;
    GenerationMapMode mode = GenerationMapMode::ThreeClass;
    std::vector<std::uint8_t> categories;  // ref_idx * n_classes + gen_idx

    int n_classes() const { return mode == GenerationMapMode::ThreeClass ? 3 : 2; }
};

GenerationMap generation_map(const BerryMask& ref, const BerryMask& gen, GenerationMapMode mode);

// Fixed palette: no-change near-white; orange shades where classes are
// generated on top of weaker reference classes, blue shades the other way;
// medium shades are the acceptable berry/berry-edge swaps.
std::array<std::uint8_t, 3> generation_map_color(GenerationMapMode mode, int category);
std::vector<std::uint8_t> render_generation_map(const GenerationMap& map);  // RGB8

struct CountTriple {
    double reference = 0.0;
    double occluded = 0.0;
    double generated = 0.0;
};

struct CountComparison {
    std::vector<CountTriple> counts;
};

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::int64_t occluded = 0;
    std::int64_t generated = 0;
};

struct RelativeDifferenceHistogram {
    double bin_width = 0.02;
    std::vector<HistogramBin> bins;
    int excluded_zero_reference = 0;  // patches skipped because reference == 0
    double mean_occluded = 0.0;       // mean relative difference per series
    double mean_generated = 0.0;
};

// (count - reference)/reference binned at the given width for the occluded
// and generated series; zero-reference patches are excluded and reported.
RelativeDifferenceHistogram relative_difference_histogram(const CountComparison& counts,
                                                          double bin_width = 0.02);

}  // namespace berrygan
