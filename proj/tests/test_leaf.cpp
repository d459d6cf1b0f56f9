#include <doctest.h>

#include <algorithm>
#include <set>

#include "berrygan/counting.hpp"
#include "berrygan/leaf.hpp"
#include "berrygan/metrics.hpp"
#include "oracles.hpp"

using namespace berrygan;

namespace {

SceneConfig desk_cfg() {
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

std::vector<ScenePatch> some_scenes(int count, std::uint64_t first_seed = 300) {
    SceneConfig cfg = desk_cfg();
    std::vector<ScenePatch> scenes;
    for (int i = 0; i < count; ++i) scenes.push_back(generate_scene(cfg, first_seed + i));
    return scenes;
}

// Footprint minus anything reachable within `iters` chebyshev steps from the
// outside; pixels surviving this are beyond the reach of the edge repair.
Footprint erode(const Footprint& fp, int iters) {
    Footprint cur = fp;
    for (int it = 0; it < iters; ++it) {
        Footprint next = cur;
        for (int y = 0; y < cur.height; ++y)
            for (int x = 0; x < cur.width; ++x) {
                if (!cur.at(x, y)) continue;
                bool edge = false;
                for (int dy = -1; dy <= 1 && !edge; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = x + dx, ny = y + dy;
                        if (!cur.in_bounds(nx, ny) || !cur.at(nx, ny)) {
                            edge = true;
                            break;
                        }
                    }
                if (edge) next.set(x, y, false);
            }
        cur = next;
    }
    return cur;
}

bool pairs_equal(const PatchPair& a, const PatchPair& b) {
    return a.occluded_image == b.occluded_image && a.occluded_mask == b.occluded_mask &&
           a.nonoccluded_image == b.nonoccluded_image &&
           a.nonoccluded_mask == b.nonoccluded_mask && a.leaf_footprint == b.leaf_footprint &&
           a.provenance.scene_seed == b.provenance.scene_seed &&
           a.provenance.leaf_id == b.provenance.leaf_id &&
           a.provenance.angle == b.provenance.angle &&
           a.provenance.offset_x == b.provenance.offset_x &&
           a.provenance.offset_y == b.provenance.offset_y;
}

}  // namespace

TEST_SUITE("occlusion") {

TEST_CASE("the allowed rotation set is fixed") {
    std::vector<int> want = {-50, -30, -10, 0, 10, 30, 50, 70};
    CHECK(std::vector<int>(kLeafAngles.begin(), kLeafAngles.end()) == want);
    for (int a : want) CHECK(is_valid_leaf_angle(a));
    CHECK_FALSE(is_valid_leaf_angle(20));
    CHECK_FALSE(is_valid_leaf_angle(90));
    CHECK_FALSE(is_valid_leaf_angle(-70));
}

TEST_CASE("angles outside the set are rejected unless overridden") {
    auto scenes = some_scenes(1);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    CHECK_THROWS_AS(occlude_with_leaf(scenes[0], bank[0], 45, 36, 36), std::invalid_argument);
    PatchPair p = occlude_with_leaf(scenes[0], bank[0], 45, 36, 36, true);
    CHECK(p.provenance.angle == 45);
}

TEST_CASE("the default bank ships 24 leaves split 18 train 6 test") {
    auto bank = make_leaf_bank(24, 18, 72, 1);
    REQUIRE(bank.size() == 24);
    for (int i = 0; i < 24; ++i) {
        CHECK(bank[i].id == i);
        CHECK(bank[i].split == (i < 18 ? Split::Train : Split::Test));
        CHECK(bank[i].footprint.count() > 0);

        // footprint must be one 4-connected region
        BerryMask as_mask(bank[i].footprint.width, bank[i].footprint.height);
        for (int y = 0; y < as_mask.height; ++y)
            for (int x = 0; x < as_mask.width; ++x)
                if (bank[i].footprint.at(x, y)) as_mask.at(x, y) = kBerry;
        CHECK(oracles::flood_count(as_mask) == 1);
    }
    CHECK(filter_leaves(bank, Split::Train).size() == 18);
    CHECK(filter_leaves(bank, Split::Test).size() == 6);
    for (const auto& leaf : filter_leaves(bank, Split::Test)) CHECK(leaf.id >= 18);
}

TEST_CASE("pair grids agree outside the footprint and hide berries inside it") {
    auto scenes = some_scenes(6);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    auto pairs = augment_dataset(scenes, filter_leaves(bank, Split::Train), Split::Train, 9);
    REQUIRE(pairs.size() == 6 * 9);
    for (const PatchPair& p : pairs) {
        REQUIRE(p.occluded_mask.width == p.nonoccluded_mask.width);
        REQUIRE(p.occluded_mask.height == p.nonoccluded_mask.height);
        REQUIRE(p.leaf_footprint.width == p.occluded_mask.width);
        REQUIRE(p.occluded_image.width == p.occluded_mask.width);

        Footprint deep = erode(p.leaf_footprint, 3);
        for (int y = 0; y < p.occluded_mask.height; ++y)
            for (int x = 0; x < p.occluded_mask.width; ++x) {
                if (!p.leaf_footprint.at(x, y)) {
                    // untouched outside the leaf
                    CHECK(p.occluded_mask.at(x, y) == p.nonoccluded_mask.at(x, y));
                    CHECK(p.occluded_image.at(x, y) == p.nonoccluded_image.at(x, y));
                } else {
                    // under the leaf only background or repaired edge survive
                    CHECK(p.occluded_mask.at(x, y) != kBerry);
                    if (deep.at(x, y)) CHECK(p.occluded_mask.at(x, y) == kBackground);
                }
            }
    }
}

TEST_CASE("reocclude on the identity cases") {
    auto scenes = some_scenes(1);
    const BerryMask& m = scenes[0].mask;
    Footprint empty(m.width, m.height);
    CHECK(reocclude(m, empty) == m);
    Footprint full(m.width, m.height, 1);
    BerryMask wiped = reocclude(m, full);
    for (std::uint8_t v : wiped.pixels) CHECK(v == kBackground);
    Footprint wrong(m.width + 1, m.height);
    CHECK_THROWS_AS(reocclude(m, wrong), std::invalid_argument);
}

TEST_CASE("both construction paths of the occluded mask agree") {
    auto scenes = some_scenes(5);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    auto pairs = augment_dataset(scenes, filter_leaves(bank, Split::Test), Split::Test, 9);
    REQUIRE(pairs.size() == 5 * 3);
    for (const PatchPair& p : pairs)
        CHECK(reocclude(p.nonoccluded_mask, p.leaf_footprint) == p.occluded_mask);
}

TEST_CASE("reoccluding the reference reproduces the occluded mask exactly, so they correlate fully") {
    auto scenes = some_scenes(4);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    auto pairs = augment_dataset(scenes, filter_leaves(bank, Split::Train), Split::Train, 11);
    for (const PatchPair& p : pairs) {
        BerryMask rebuilt = reocclude(p.nonoccluded_mask, p.leaf_footprint);
        auto rho = pearson_correlation(p.occluded_mask, rebuilt);
        if (rho) CHECK(*rho == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("augmentation multiplicity follows the split") {
    auto scenes = some_scenes(4);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    CHECK(augment_dataset(scenes, filter_leaves(bank, Split::Train), Split::Train, 9).size() == 36);
    CHECK(augment_dataset(scenes, filter_leaves(bank, Split::Test), Split::Test, 9).size() == 12);
    CHECK(augment_dataset(scenes, filter_leaves(bank, Split::Train), Split::Train, 9, 2).size() ==
          8);
    CHECK_THROWS_AS(augment_dataset(scenes, {}, Split::Train, 9), std::invalid_argument);
}

TEST_CASE("augmentation is deterministic per seed") {
    auto scenes = some_scenes(3);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    auto pool = filter_leaves(bank, Split::Train);
    auto a = augment_dataset(scenes, pool, Split::Train, 77);
    auto b = augment_dataset(scenes, pool, Split::Train, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(pairs_equal(a[i], b[i]));
    auto c = augment_dataset(scenes, pool, Split::Train, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!pairs_equal(a[i], c[i])) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("test pairs never borrow train leaves") {
    auto scenes = some_scenes(6);
    auto bank = make_leaf_bank(24, 18, 72, 1);
    auto pairs = augment_dataset(scenes, filter_leaves(bank, Split::Test), Split::Test, 9);
    std::set<int> used;
    for (const PatchPair& p : pairs) used.insert(p.provenance.leaf_id);
    for (int id : used) CHECK(id >= 18);
    CHECK(used.size() > 1);  // the draw actually varies
}

TEST_CASE("a bar leaf bisecting a berry leaves one or two closed remainders") {
    SceneConfig cfg = desk_cfg();
    cfg.patch_size = 65;
    cfg.bunches_per_patch = {1, 1};
    cfg.berries_per_bunch = {1, 1};
    cfg.berry_radius = {10, 10};
    ScenePatch scene = generate_scene(cfg, 9);
    REQUIRE(scene.berry_count == 1);
    auto comps = label_components(scene.mask);
    REQUIRE(comps.size() == 1);
    int row = static_cast<int>(std::lround(comps[0].centroid_y));

    LeafTemplate bar;
    bar.id = 99;
    bar.footprint = Footprint(65, 65);
    bar.texture = GrayscaleImage(65, 65, 90);
    for (int y = row - 3; y <= row + 3; ++y)
        for (int x = 0; x < 65; ++x) bar.footprint.set(x, y, true);

    PatchPair p = occlude_with_leaf(scene, bar, 0, 32, 32);
    int after = oracles::flood_count(p.occluded_mask);
    CHECK(after == 2);  // the bar runs through the centroid, so it splits

    // each remainder keeps a closed berry-edge contour
    const BerryMask& m = p.occluded_mask;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (m.at(x, y) != kBerry) continue;
            const int dx4[4] = {-1, 1, 0, 0};
            const int dy4[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                int nx = x + dx4[k], ny = y + dy4[k];
                if (m.in_bounds(nx, ny) && m.at(nx, ny) == kBackground) {
                    // a berry pixel directly on background would be an open contour
                    CHECK(false);
                }
            }
        }
}

TEST_CASE("a leaf that misses every berry keeps the count") {
    SceneConfig cfg = desk_cfg();
    cfg.patch_size = 65;
    ScenePatch scene = generate_scene(cfg, 21);
    REQUIRE(scene.berry_count > 0);

    // find an all-background corner strip for the leaf
    LeafTemplate spot;
    spot.id = 98;
    spot.footprint = Footprint(65, 65);
    spot.texture = GrayscaleImage(65, 65, 80);
    // clearance includes the footprint's 8-neighborhood so no edge repair fires
    int cx = -1, cy = -1;
    for (int y = 0; y < 58 && cx < 0; ++y)
        for (int x = 0; x < 58; ++x) {
            bool clear = true;
            for (int dy = 0; dy < 7 && clear; ++dy)
                for (int dx = 0; dx < 7; ++dx)
                    if (scene.mask.at(x + dx, y + dy) != kBackground) clear = false;
            if (clear) {
                cx = x;
                cy = y;
                break;
            }
        }
    REQUIRE(cx >= 0);
    for (int dy = 1; dy < 6; ++dy)
        for (int dx = 1; dx < 6; ++dx) spot.footprint.set(cx + dx, cy + dy, true);

    PatchPair p = occlude_with_leaf(scene, spot, 0, 32, 32);
    CHECK(p.occluded_mask == p.nonoccluded_mask);
    CHECK(oracles::flood_count(p.occluded_mask) == scene.berry_count);
}

}  // TEST_SUITE
