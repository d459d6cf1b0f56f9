#include "berrygan/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "berrygan/counting.hpp"
#include "berrygan/rng.hpp"

namespace berrygan {
namespace {

struct Berry {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
    double base = 110.0;
};

// Low-end-skewed draw from an inclusive range. Squaring the uniform sample
// produces the long-tailed berry count distribution of real patch datasets:
// mostly sparse patches, occasionally crowded ones.
int skewed_count(Rng& rng, const IntRange& range) {
    double u = rng.uniform_real();
    double span = static_cast<double>(range.hi - range.lo) + 1.0;
    int v = range.lo + static_cast<int>(std::floor(u * u * span));
    return std::min(v, range.hi);
}

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Deterministic per-pixel grain, independent of draw order.
double pixel_noise(std::uint64_t seed, int x, int y) {
    std::uint64_t h = Rng::splitmix64(seed ^ (static_cast<std::uint64_t>(y) << 24) ^ static_cast<std::uint64_t>(x) ^ 0x5bd1e995ULL);
    return static_cast<double>(h & 0xffu) / 255.0 * 2.0 - 1.0;
}

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(clampd(std::floor(v + 0.5), 0.0, 255.0));
}

void paint_background(GrayscaleImage& img, Rng& rng, const SceneConfig& cfg, std::uint64_t noise_seed) {
    double g0 = rng.uniform_real(cfg.background_level.lo, cfg.background_level.hi);
    double g1 = rng.uniform_real(cfg.background_level.lo, cfg.background_level.hi);
    double angle = rng.uniform_real(0.0, 6.283185307179586);
    double dx = std::cos(angle);
    double dy = std::sin(angle);
    int n = img.width;
    double half = (n - 1) * 0.5;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            // project onto the gradient axis, normalized to [0,1]
            double t = ((x - half) * dx + (y - half) * dy) / (n * 1.41421356) + 0.5;
            double lum = g0 + (g1 - g0) * clampd(t, 0.0, 1.0);
            lum += 3.5 * pixel_noise(noise_seed, x, y);
            img.at(x, y) = to_u8(lum);
        }
    }
}

// Dark woody line of the given thickness. Grayscale only, masks treat
// branches as background.
void paint_branch(GrayscaleImage& img, double x0, double y0, double x1, double y1,
                  double thickness, double lum, std::uint64_t noise_seed) {
    double len = std::hypot(x1 - x0, y1 - y0);
    int steps = std::max(2, static_cast<int>(std::ceil(len * 2.0)));
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        // slight bow so branches do not read as ruler lines
        double bow = std::sin(t * 3.14159265358979) * len * 0.04;
        double nxd = -(y1 - y0) / std::max(len, 1e-9);
        double nyd = (x1 - x0) / std::max(len, 1e-9);
        double cx = x0 + (x1 - x0) * t + nxd * bow;
        double cy = y0 + (y1 - y0) * t + nyd * bow;
        int r = static_cast<int>(std::ceil(thickness));
        for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y) {
            for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
                if (!img.in_bounds(x, y)) continue;
                double d = std::hypot(x - cx, y - cy);
                if (d <= thickness * 0.5) {
                    img.at(x, y) = to_u8(lum + 9.0 * pixel_noise(noise_seed ^ 0x9e37ULL, x, y));
                }
            }
        }
    }
}

void paint_berry(GrayscaleImage& img, BerryMask& mask, const Berry& b, int edge_width,
                 std::uint64_t noise_seed) {
    // light from the upper left
    const double lx = -0.35, ly = -0.45, lz = 0.8215;
    int x_lo = static_cast<int>(std::floor(b.cx - b.r));
    int x_hi = static_cast<int>(std::ceil(b.cx + b.r));
    int y_lo = static_cast<int>(std::floor(b.cy - b.r));
    int y_hi = static_cast<int>(std::ceil(b.cy + b.r));
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            if (!img.in_bounds(x, y)) continue;
            double d = std::hypot(x - b.cx, y - b.cy);
            if (d > b.r) continue;
            double nx = (x - b.cx) / b.r;
            double ny = (y - b.cy) / b.r;
            double z2 = std::max(0.0, 1.0 - nx * nx - ny * ny);
            double z = std::sqrt(z2);
            double lam = std::max(0.0, nx * lx + ny * ly + z * lz);
            double lum = b.base * (0.26 + 0.74 * lam) + 30.0 * std::pow(lam, 9.0);
            lum += 3.0 * pixel_noise(noise_seed ^ 0x51edULL, x, y);
            img.at(x, y) = to_u8(lum);
            mask.at(x, y) = (d > b.r - edge_width) ? kBerryEdge : kBerry;
        }
    }
}

}  // namespace

void SceneConfig::validate() const {
    if (patch_size < 16) throw std::invalid_argument("scene: patch_size must be at least 16");
    if (!bunches_per_patch.valid() || bunches_per_patch.lo < 0)
        throw std::invalid_argument("scene: bad bunches_per_patch range");
    if (!berries_per_bunch.valid() || berries_per_bunch.lo < 0)
        throw std::invalid_argument("scene: bad berries_per_bunch range");
    if (!berry_radius.valid() || berry_radius.lo < 3)
        throw std::invalid_argument("scene: berry radius must be at least 3");
    if (berry_radius.hi > patch_size / 2)
        throw std::invalid_argument("scene: berry radius exceeds half the patch size");
    if (edge_width < 1 || edge_width >= berry_radius.lo)
        throw std::invalid_argument("scene: edge_width must be in [1, radius)");
    if (!branch_count.valid() || branch_count.lo < 0)
        throw std::invalid_argument("scene: bad branch_count range");
    if (!background_level.valid() || background_level.lo < 0 || background_level.hi > 255)
        throw std::invalid_argument("scene: background_level must stay within [0,255]");
}

ScenePatch generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng = Rng(cfg.seed, 7).split(seed);
    std::uint64_t noise_seed = rng.next_u64();

    int n = cfg.patch_size;
    ScenePatch out;
    out.seed = seed;
    out.image = GrayscaleImage(n, n);
    out.mask = BerryMask(n, n);
    std::fill(out.mask.pixels.begin(), out.mask.pixels.end(), kBackground);

    paint_background(out.image, rng, cfg, noise_seed);

    bool trained = cfg.style == SceneStyle::Trained;
    double cordon_y = rng.uniform_real(0.32, 0.45) * n;
    int branches = rng.uniform_int(cfg.branch_count.lo, cfg.branch_count.hi);
    if (trained) {
        // the horizontal cordon the bunches hang from
        paint_branch(out.image, 0.0, cordon_y, n - 1.0, cordon_y + rng.uniform_real(-3.0, 3.0),
                     rng.uniform_real(2.0, 3.2) * n / 96.0, rng.uniform_real(38.0, 66.0), noise_seed);
    }
    for (int i = 0; i < branches; ++i) {
        double x0 = rng.uniform_real(0.0, n - 1.0);
        double x1 = clampd(x0 + rng.uniform_real(-0.6, 0.6) * n, 0.0, n - 1.0);
        double y0, y1;
        if (trained) {
            // shoots growing up from the cordon
            y0 = cordon_y;
            y1 = clampd(cordon_y - rng.uniform_real(0.25, 0.9) * n, 0.0, n - 1.0);
        } else {
            y0 = rng.uniform_real(0.0, n - 1.0);
            y1 = clampd(y0 + rng.uniform_real(-0.6, 0.6) * n, 0.0, n - 1.0);
        }
        paint_branch(out.image, x0, y0, x1, y1, rng.uniform_real(1.2, 2.6) * n / 96.0,
                     rng.uniform_real(38.0, 70.0), noise_seed + i + 1);
    }

    int bunches = skewed_count(rng, cfg.bunches_per_patch);
    std::vector<Berry> berries;
    for (int bi = 0; bi < bunches; ++bi) {
        double r_hi = static_cast<double>(cfg.berry_radius.hi);
        double margin = r_hi + cfg.edge_width + 2.0;
        double bx = rng.uniform_real(margin, n - 1.0 - margin);
        double by;
        if (trained) {
            by = clampd(cordon_y + rng.uniform_real(0.08, 0.42) * n, margin, n - 1.0 - margin);
        } else {
            by = rng.uniform_real(margin, n - 1.0 - margin);
        }
        int k = skewed_count(rng, cfg.berries_per_bunch);
        double r_mean = 0.5 * (cfg.berry_radius.lo + cfg.berry_radius.hi);
        double spread = r_mean * (0.62 * std::sqrt(static_cast<double>(std::max(k, 1))) + 0.7);
        std::vector<Berry> bunch;
        int attempts = 0;
        int attempt_cap = 60 * std::max(k, 1);
        while (static_cast<int>(bunch.size()) < k && attempts < attempt_cap) {
            ++attempts;
            Berry b;
            b.r = rng.uniform_real(cfg.berry_radius.lo, cfg.berry_radius.hi);
            // bunches taper downward, so shrink the spread near the bottom
            double oy = rng.normal() * spread * 0.8;
            double width_here = spread * clampd(1.0 - 0.35 * (oy / std::max(spread, 1e-9)), 0.45, 1.3);
            double ox = rng.normal() * width_here;
            double lim = b.r + cfg.edge_width + 1.5;
            b.cx = bx + ox;
            b.cy = by + oy;
            if (b.cx < lim || b.cx > n - 1.0 - lim || b.cy < lim || b.cy > n - 1.0 - lim) continue;
            bool too_close = false;
            for (const Berry& other : bunch) {
                if (std::hypot(b.cx - other.cx, b.cy - other.cy) < 0.72 * (b.r + other.r)) {
                    too_close = true;
                    break;
                }
            }
            if (too_close) continue;
            b.base = rng.uniform_real(78.0, 138.0);
            bunch.push_back(b);
        }
        berries.insert(berries.end(), bunch.begin(), bunch.end());
    }

    for (const Berry& b : berries) {
        paint_berry(out.image, out.mask, b, cfg.edge_width, noise_seed);
    }

    // Ground truth comes from the mask actually emitted, so berries that were
    // overdrawn, merged or clipped during painting cannot skew the label.
    out.berry_count = static_cast<int>(label_components(out.mask).size());
    return out;
}

bool passes_patch_filter(const BerryMask& occluded, const BerryMask& nonoccluded) {
    if (occluded.width != nonoccluded.width || occluded.height != nonoccluded.height)
        throw std::invalid_argument("patch filter: size mismatch");
    std::size_t non_bg_ref = 0;
    for (std::uint8_t v : nonoccluded.pixels)
        if (v != kBackground) ++non_bg_ref;
    std::size_t total = nonoccluded.pixels.size();
    if (non_bg_ref * 24 <= total) return false;
    for (std::uint8_t v : occluded.pixels)
        if (v != kBackground) return true;
    return false;
}

}  // namespace berrygan
