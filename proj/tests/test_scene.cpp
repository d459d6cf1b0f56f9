#include <doctest.h>

#include "berrygan/counting.hpp"
#include "berrygan/scene.hpp"
#include "oracles.hpp"

using namespace berrygan;

namespace {

SceneConfig small_cfg() {
    SceneConfig cfg;
    cfg.patch_size = 72;
    cfg.bunches_per_patch = {1, 2};
    cfg.berries_per_bunch = {5, 12};
    cfg.berry_radius = {6, 9};
    cfg.edge_width = 2;
    cfg.branch_count = {1, 3};
    cfg.background_level = {165, 232};
    return cfg;
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("same config and seed give identical patches") {
    SceneConfig cfg = small_cfg();
    ScenePatch a = generate_scene(cfg, 42);
    ScenePatch b = generate_scene(cfg, 42);
    CHECK(a.image == b.image);
    CHECK(a.mask == b.mask);
    CHECK(a.berry_count == b.berry_count);
    ScenePatch c = generate_scene(cfg, 43);
    CHECK(a.mask.pixels != c.mask.pixels);
}

TEST_CASE("zero bunches means an all-background mask") {
    SceneConfig cfg = small_cfg();
    cfg.bunches_per_patch = {0, 0};
    ScenePatch p = generate_scene(cfg, 5);
    CHECK(p.berry_count == 0);
    for (std::uint8_t v : p.mask.pixels) CHECK(v == kBackground);
}

TEST_CASE("one bunch of ten berries counts ten, confirmed by flood fill") {
    SceneConfig cfg = small_cfg();
    cfg.patch_size = 150;
    cfg.bunches_per_patch = {1, 1};
    cfg.berries_per_bunch = {10, 10};
    cfg.berry_radius = {5, 6};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ScenePatch p = generate_scene(cfg, seed);
        CHECK(p.berry_count == 10);
        CHECK(oracles::flood_count(p.mask) == 10);
    }
}

TEST_CASE("stored berry count always equals the unfiltered component count") {
    SceneConfig cfg = small_cfg();
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        ScenePatch p = generate_scene(cfg, seed);
        CHECK(p.berry_count == oracles::flood_count(p.mask));
        CHECK(p.mask.is_quantized());
    }
}

TEST_CASE("every berry boundary pixel touches a berry-edge pixel") {
    SceneConfig cfg = small_cfg();
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        ScenePatch p = generate_scene(cfg, seed);
        const BerryMask& m = p.mask;
        for (int y = 0; y < m.height; ++y) {
            for (int x = 0; x < m.width; ++x) {
                if (m.at(x, y) != kBerry) continue;
                bool boundary = false;
                const int dx4[4] = {-1, 1, 0, 0};
                const int dy4[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int nx = x + dx4[k], ny = y + dy4[k];
                    if (!m.in_bounds(nx, ny) || m.at(nx, ny) != kBerry) boundary = true;
                }
                if (!boundary) continue;
                bool touches_edge = false;
                for (int dy = -1; dy <= 1 && !touches_edge; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = x + dx, ny = y + dy;
                        if (m.in_bounds(nx, ny) && m.at(nx, ny) == kBerryEdge) {
                            touches_edge = true;
                            break;
                        }
                    }
                CHECK(touches_edge);
            }
        }
    }
}

TEST_CASE("patch filter needs strictly more than a twenty-fourth non-background") {
    BerryMask non(48, 48), occ(48, 48);
    CHECK_FALSE(passes_patch_filter(occ, non));  // both all background

    // 48*48 = 2304 pixels; the threshold count is exactly 96
    for (int i = 0; i < 96; ++i) non.pixels[i] = kBerry;
    occ.pixels[0] = kBerry;
    CHECK_FALSE(passes_patch_filter(occ, non));  // exactly 1/24 is not enough
    non.pixels[96] = kBerry;
    CHECK(passes_patch_filter(occ, non));

    BerryMask occ_empty(48, 48);
    CHECK_FALSE(passes_patch_filter(occ_empty, non));  // occluded side fully background

    BerryMask wrong(47, 48);
    CHECK_THROWS_AS(passes_patch_filter(wrong, non), std::invalid_argument);
}

TEST_CASE("ten percent berry coverage passes") {
    BerryMask non(50, 50), occ(50, 50);
    for (int i = 0; i < 250; ++i) non.pixels[i] = kBerry;
    occ.pixels[100] = kBerryEdge;
    CHECK(passes_patch_filter(occ, non));
}

TEST_CASE("impossible geometry is rejected") {
    SceneConfig cfg = small_cfg();
    cfg.berry_radius = {40, 40};  // radius > patch_size/2
    CHECK_THROWS_AS(generate_scene(cfg, 1), std::invalid_argument);
    SceneConfig bad = small_cfg();
    bad.berries_per_bunch = {5, 2};
    CHECK_THROWS_AS(generate_scene(bad, 1), std::invalid_argument);
}

}  // TEST_SUITE
