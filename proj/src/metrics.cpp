#include "berrygan/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace berrygan {

namespace {

void check_same_size(const detail::Grid8& a, const detail::Grid8& b, const char* op) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(op) + ": size mismatch");
}

}  // namespace

std::int64_t area(const BerryMask& mask, MaskClass c) {
    const std::uint8_t v = static_cast<std::uint8_t>(c);
    std::int64_t n = 0;
    for (std::uint8_t p : mask.pixels) n += (p == v);
    return n;
}

double iou(const BerryMask& ref, const BerryMask& gen, MaskClass c) {
    check_same_size(ref, gen, "iou");
    const std::uint8_t v = static_cast<std::uint8_t>(c);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
        const bool a = ref.pixels[i] == v;
        const bool b = gen.pixels[i] == v;
        inter += (a && b);
        uni += (a || b);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> pearson_correlation(const std::vector<std::uint8_t>& a,
                                          const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("pearson_correlation: size mismatch");
    const double n = static_cast<double>(a.size());
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / n, mb = sb / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

std::optional<double> pearson_correlation(const detail::Grid8& a, const detail::Grid8& b) {
    check_same_size(a, b, "pearson_correlation");
    return pearson_correlation(a.pixels, b.pixels);
}

RSquared r_squared(const std::vector<double>& predicted, const std::vector<double>& reference) {
    if (predicted.size() != reference.size())
        throw std::invalid_argument("r_squared: length mismatch");
    if (predicted.size() < 2) throw std::invalid_argument("r_squared: need at least 2 points");

    const double n = static_cast<double>(reference.size());
    double mean_ref = 0.0;
    for (double r : reference) mean_ref += r;
    mean_ref /= n;

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = predicted[i] - reference[i];
        ss_res += d * d;
        const double t = reference[i] - mean_ref;
        ss_tot += t * t;
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r_squared: constant reference sequence");

    RSquared out;
    out.r2 = 1.0 - ss_res / ss_tot;

    // Least-squares line predicted ~ slope*reference + intercept.
    double mean_pred = 0.0;
    for (double p : predicted) mean_pred += p;
    mean_pred /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        sxy += (reference[i] - mean_ref) * (predicted[i] - mean_pred);
        sxx += (reference[i] - mean_ref) * (reference[i] - mean_ref);
    }
    out.slope = sxy / sxx;
    out.intercept = mean_pred - out.slope * mean_ref;
    return out;
}

GenerationMap generation_map(const BerryMask& ref, const BerryMask& gen, GenerationMapMode mode) {
    check_same_size(ref, gen, "generation_map");
    if (!ref.is_quantized() || !gen.is_quantized())
        throw std::invalid_argument("generation_map: masks must be quantized");

    GenerationMap map;
    map.width = ref.width;
    map.height = ref.height;
    map.mode = mode;
    map.categories.resize(ref.pixels.size());

    const int k = map.n_classes();
    for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
        int r = mask_class_index(ref.pixels[i]);
        int g = mask_class_index(gen.pixels[i]);
        if (mode == GenerationMapMode::TwoClass) {
            r = r == 0 ? 0 : 1;  // berry-edge merges into berry
            g = g == 0 ? 0 : 1;
        }
        map.categories[i] = static_cast<std::uint8_t>(r * k + g);
    }
    return map;
}

std::array<std::uint8_t, 3> generation_map_color(GenerationMapMode mode, int category) {
    // Shades: orange family marks classes generated where the reference has
    // less, blue family the reverse; intensity follows severity.
    static constexpr std::array<std::uint8_t, 3> kNoChange = {245, 245, 245};
    static constexpr std::array<std::uint8_t, 3> kOrangeDark = {204, 85, 0};
    static constexpr std::array<std::uint8_t, 3> kOrangeLight = {255, 179, 102};
    static constexpr std::array<std::uint8_t, 3> kOrangeMedium = {255, 136, 51};
    static constexpr std::array<std::uint8_t, 3> kBlueDark = {0, 51, 153};
    static constexpr std::array<std::uint8_t, 3> kBlueLight = {128, 179, 255};
    static constexpr std::array<std::uint8_t, 3> kBlueMedium = {51, 119, 255};

    if (mode == GenerationMapMode::ThreeClass) {
        switch (category) {  // ref*3 + gen with 0 bg, 1 edge, 2 berry
            case 0: case 4: case 8: return kNoChange;
            case 1: return kOrangeLight;   // bg -> edge
            case 2: return kOrangeDark;    // bg -> berry
            case 5: return kOrangeMedium;  // edge -> berry (acceptable swap)
            case 3: return kBlueLight;     // edge -> bg
            case 7: return kBlueMedium;    // berry -> edge (acceptable swap)
            case 6: return kBlueDark;      // berry -> bg
            default: throw std::invalid_argument("generation_map_color: bad category");
        }
    }
    switch (category) {  // ref*2 + gen with 0 bg, 1 merged berry
        case 0: case 3: return kNoChange;
        case 1: return kOrangeDark;  // bg -> berry
        case 2: return kBlueDark;    // berry -> bg
        default: throw std::invalid_argument("generation_map_color: bad category");
    }
}

std::vector<std::uint8_t> render_generation_map(const GenerationMap& map) {
    std::vector<std::uint8_t> rgb(map.categories.size() * 3);
    for (std::size_t i = 0; i < map.categories.size(); ++i) {
        const auto c = generation_map_color(map.mode, map.categories[i]);
        rgb[i * 3 + 0] = c[0];
        rgb[i * 3 + 1] = c[1];
        rgb[i * 3 + 2] = c[2];
    }
    return rgb;
}

RelativeDifferenceHistogram relative_difference_histogram(const CountComparison& counts,
                                                          double bin_width) {
    if (bin_width <= 0.0) throw std::invalid_argument("bin width must be positive");

    RelativeDifferenceHistogram hist;
    hist.bin_width = bin_width;

    std::vector<double> rel_occ, rel_gen;
    for (const auto& t : counts.counts) {
        if (t.reference <= 0.0) {
            ++hist.excluded_zero_reference;
            continue;
        }
        rel_occ.push_back((t.occluded - t.reference) / t.reference);
        rel_gen.push_back((t.generated - t.reference) / t.reference);
    }
    if (rel_occ.empty()) return hist;

    double lo = rel_occ[0], hi = rel_occ[0];
    double sum_occ = 0.0, sum_gen = 0.0;
    for (std::size_t i = 0; i < rel_occ.size(); ++i) {
        lo = std::min({lo, rel_occ[i], rel_gen[i]});
        hi = std::max({hi, rel_occ[i], rel_gen[i]});
        sum_occ += rel_occ[i];
        sum_gen += rel_gen[i];
    }
    hist.mean_occluded = sum_occ / static_cast<double>(rel_occ.size());
    hist.mean_generated = sum_gen / static_cast<double>(rel_gen.size());

    const auto bin_of = [bin_width](double v) {
        return static_cast<long>(std::floor(v / bin_width));
    };
    const long first = bin_of(lo), last = bin_of(hi);
    hist.bins.resize(static_cast<std::size_t>(last - first + 1));
    for (std::size_t i = 0; i < hist.bins.size(); ++i) {
        hist.bins[i].lo = static_cast<double>(first + static_cast<long>(i)) * bin_width;
        hist.bins[i].hi = hist.bins[i].lo + bin_width;
    }
    for (double v : rel_occ) ++hist.bins[static_cast<std::size_t>(bin_of(v) - first)].occluded;
    for (double v : rel_gen) ++hist.bins[static_cast<std::size_t>(bin_of(v) - first)].generated;
    return hist;
}

}  // namespace berrygan
