#include "berrygan/leaf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "berrygan/rng.hpp"

namespace berrygan {
namespace {

constexpr double kPi = 3.14159265358979323846;

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double grain(std::uint64_t seed, int x, int y) {
    std::uint64_t h = Rng::splitmix64(seed ^ (static_cast<std::uint64_t>(y) << 24) ^ static_cast<std::uint64_t>(x) ^ 0x6a09e667ULL);
    return static_cast<double>(h & 0xffu) / 255.0 * 2.0 - 1.0;
}

// Keep only the largest 4-connected region so the footprint invariant holds
// no matter what the harmonics rasterized to.
void keep_largest_region(Footprint& fp) {
    int w = fp.width, h = fp.height;
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!fp.at(x, y) || label[i] >= 0) continue;
            std::size_t size = 0;
            stack.push_back(static_cast<int>(i));
            label[i] = next;
            while (!stack.empty()) {
                int p = stack.back();
                stack.pop_back();
                ++size;
                int px = p % w, py = p / w;
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int nx = px + dx[k], ny = py + dy[k];
                    if (!fp.in_bounds(nx, ny) || !fp.at(nx, ny)) continue;
                    std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                    if (label[ni] >= 0) continue;
                    label[ni] = next;
                    stack.push_back(static_cast<int>(ni));
                }
            }
            if (size > best_size) {
                best_size = size;
                best_label = next;
            }
            ++next;
        }
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            fp.set(x, y, label[static_cast<std::size_t>(y) * w + x] == best_label);
}

double bilinear(const GrayscaleImage& img, double u, double v) {
    u = clampd(u, 0.0, img.width - 1.0);
    v = clampd(v, 0.0, img.height - 1.0);
    int x0 = static_cast<int>(std::floor(u));
    int y0 = static_cast<int>(std::floor(v));
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = u - x0, fy = v - y0;
    double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace

bool is_valid_leaf_angle(int angle_deg) {
    for (int a : kLeafAngles)
        if (a == angle_deg) return true;
    return false;
}

std::vector<LeafTemplate> make_leaf_bank(int count, int train_count, int patch_size,
                                         std::uint64_t seed) {
    if (count <= 0 || train_count < 0 || train_count > count)
        throw std::invalid_argument("leaf bank: bad count/train_count");
    if (patch_size < 16) throw std::invalid_argument("leaf bank: patch_size too small");

    std::vector<LeafTemplate> bank;
    bank.reserve(count);
    Rng root(seed, 17);
    for (int id = 0; id < count; ++id) {
        Rng rng = root.split(static_cast<std::uint64_t>(id));
        std::uint64_t noise_seed = rng.next_u64();

        double R = patch_size * rng.uniform_real(0.26, 0.42);
        int lobes = rng.coin() ? 5 : 7;
        double a1 = rng.uniform_real(0.13, 0.21);
        double a2 = rng.uniform_real(0.04, 0.09);
        double a3 = rng.uniform_real(0.02, 0.06);
        double p1 = rng.uniform_real(0.0, 2.0 * kPi);
        double p2 = rng.uniform_real(0.0, 2.0 * kPi);
        double p3 = rng.uniform_real(0.0, 2.0 * kPi);
        double base = rng.uniform_real(52.0, 90.0);
        double blotch_fx = rng.uniform_real(0.15, 0.45);
        double blotch_fy = rng.uniform_real(0.15, 0.45);

        int canvas = std::max(8, static_cast<int>(std::ceil(2.0 * R * 1.28)) | 1);
        double c = (canvas - 1) * 0.5;

        LeafTemplate leaf;
        leaf.id = id;
        leaf.split = id < train_count ? Split::Train : Split::Test;
        leaf.footprint = Footprint(canvas, canvas);
        leaf.texture = GrayscaleImage(canvas, canvas);

        auto radius_at = [&](double phi) {
            return R * (0.70 + a1 * std::cos(lobes * phi + p1) + a2 * std::cos(2.0 * lobes * phi + p2) +
                        a3 * std::sin(3.0 * phi + p3));
        };

        for (int y = 0; y < canvas; ++y) {
            for (int x = 0; x < canvas; ++x) {
                double dx = x - c, dy = y - c;
                double d = std::hypot(dx, dy);
                double phi = std::atan2(dy, dx);
                double rp = radius_at(phi);
                if (d > rp) continue;
                leaf.footprint.set(x, y, true);
                double t = d / std::max(rp, 1e-9);
                double lum = base - 13.0 * t * t;
                // main veins along the lobe directions, lighter than the blade
                for (int k = 0; k < lobes; ++k) {
                    double vk = p1 / lobes + 2.0 * kPi * k / lobes;
                    double delta = std::remainder(phi - vk, 2.0 * kPi);
                    double off = std::abs(d * std::sin(delta));
                    if (std::cos(delta) > 0.0 && off < 1.4) lum += 19.0 * (1.0 - off / 1.4);
                }
                lum += 7.0 * std::sin(x * blotch_fx + p2) * std::sin(y * blotch_fy + p3);
                lum += 4.5 * grain(noise_seed, x, y);
                leaf.texture.at(x, y) = static_cast<std::uint8_t>(clampd(std::floor(lum + 0.5), 0.0, 255.0));
            }
        }
        keep_largest_region(leaf.footprint);
        if (leaf.footprint.count() == 0) throw std::logic_error("leaf bank: empty footprint");
        bank.push_back(std::move(leaf));
    }
    return bank;
}

std::vector<LeafTemplate> filter_leaves(const std::vector<LeafTemplate>& bank, Split split) {
    std::vector<LeafTemplate> out;
    for (const LeafTemplate& leaf : bank)
        if (leaf.split == split) out.push_back(leaf);
    return out;
}

BerryMask reocclude(const BerryMask& mask, const Footprint& footprint) {
    if (mask.width != footprint.width || mask.height != footprint.height)
        throw std::invalid_argument("reocclude: size mismatch");
    int w = mask.width, h = mask.height;
    BerryMask out = mask;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (footprint.at(x, y)) out.at(x, y) = kBackground;

    // edge repair: march a berry-edge band up to 3 px into the wiped area,
    // starting from the berry pixels that survived outside the footprint
    std::vector<std::uint8_t> front(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (out.at(x, y) == kBerry) front[static_cast<std::size_t>(y) * w + x] = 1;

    for (int iter = 0; iter < 3; ++iter) {
        std::vector<std::pair<int, int>> added;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!footprint.at(x, y) || out.at(x, y) != kBackground) continue;
                bool near_front = false;
                for (int ny = y - 1; ny <= y + 1 && !near_front; ++ny)
                    for (int nx = x - 1; nx <= x + 1; ++nx) {
                        if (nx == x && ny == y) continue;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        if (front[static_cast<std::size_t>(ny) * w + nx]) {
                            near_front = true;
                            break;
                        }
                    }
                if (near_front) added.emplace_back(x, y);
            }
        }
        std::fill(front.begin(), front.end(), 0);
        for (auto [x, y] : added) {
            out.at(x, y) = kBerryEdge;
            front[static_cast<std::size_t>(y) * w + x] = 1;
        }
        if (added.empty()) break;
    }
    return out;
}

PatchPair occlude_with_leaf(const ScenePatch& scene, const LeafTemplate& leaf, int angle_deg,
                            int offset_x, int offset_y, bool allow_any_angle) {
    if (!allow_any_angle && !is_valid_leaf_angle(angle_deg))
        throw std::invalid_argument("occlude: angle not in the allowed set");

    int n = scene.image.width;
    double theta = angle_deg * kPi / 180.0;
    double ct = std::cos(theta), st = std::sin(theta);
    double lc = (leaf.footprint.width - 1) * 0.5;

    PatchPair pair;
    pair.nonoccluded_image = scene.image;
    pair.nonoccluded_mask = scene.mask;
    pair.occluded_image = scene.image;
    pair.leaf_footprint = Footprint(n, scene.image.height);
    pair.provenance = {scene.seed, leaf.id, angle_deg, offset_x, offset_y};

    // inverse-map each patch pixel into leaf canvas coordinates
    for (int y = 0; y < scene.image.height; ++y) {
        for (int x = 0; x < n; ++x) {
            double dx = x - offset_x, dy = y - offset_y;
            double u = ct * dx + st * dy + lc;
            double v = -st * dx + ct * dy + lc;
            int ui = static_cast<int>(std::lround(u));
            int vi = static_cast<int>(std::lround(v));
            if (!leaf.footprint.in_bounds(ui, vi) || !leaf.footprint.at(ui, vi)) continue;
            pair.leaf_footprint.set(x, y, true);
            pair.occluded_image.at(x, y) =
                static_cast<std::uint8_t>(std::lround(bilinear(leaf.texture, u, v)));
        }
    }
    if (pair.leaf_footprint.count() == 0)
        throw std::invalid_argument("occlude: rotated footprint misses the patch");

    pair.occluded_mask = reocclude(scene.mask, pair.leaf_footprint);
    return pair;
}

std::vector<PatchPair> augment_dataset(const std::vector<ScenePatch>& scenes,
                                       const std::vector<LeafTemplate>& leaf_pool, Split split,
                                       std::uint64_t seed, int pairs_per_scene) {
    if (leaf_pool.empty()) throw std::invalid_argument("augment: empty leaf pool");
    for (const LeafTemplate& leaf : leaf_pool)
        if (leaf.split != split) throw std::invalid_argument("augment: leaf pool not filtered to split");

    int per_scene = pairs_per_scene > 0 ? pairs_per_scene : (split == Split::Train ? 9 : 3);
    std::vector<PatchPair> pairs;
    pairs.reserve(scenes.size() * per_scene);
    Rng root(seed, 19);
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const ScenePatch& scene = scenes[si];
        Rng rng = root.split((static_cast<std::uint64_t>(si) << 32) ^ scene.seed);
        for (int p = 0; p < per_scene; ++p) {
            const LeafTemplate& leaf = leaf_pool[rng.uniform_below(static_cast<std::uint32_t>(leaf_pool.size()))];
            int angle = kLeafAngles[rng.uniform_below(static_cast<std::uint32_t>(kLeafAngles.size()))];
            // center always lands on the patch, so the footprint is never empty
            int ox = rng.uniform_int(0, scene.image.width - 1);
            int oy = rng.uniform_int(0, scene.image.height - 1);
            pairs.push_back(occlude_with_leaf(scene, leaf, angle, ox, oy));
        }
    }
    return pairs;
}

}  // namespace berrygan
