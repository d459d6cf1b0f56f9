#pragma once

#include <cstdint>

#include "berrygan/image.hpp"

namespace berrygan {

struct IntRange {
    int lo = 0;
    int hi = 0;
    bool valid() const { return lo <= hi; }
};

// Two procedural layouts mirroring the two vine training systems: "dense"
// scatters many bunches over the whole patch, "trained" keeps fewer bunches
// along a horizontal cordon band.
enum class SceneStyle { Dense, Trained };

struct SceneConfig {
    std::uint64_t seed = 1;            // dataset-level seed, mixed with the per-patch seed
    int patch_size = 286;
    IntRange bunches_per_patch{0, 4};
    IntRange berries_per_bunch{8, 56};
    IntRange berry_radius{6, 11};
    int edge_width = 2;
    IntRange branch_count{1, 4};
    IntRange background_level{165, 232};
    SceneStyle style = SceneStyle::Trained;

    void validate() const;
};

// A non-occluded patch with its perfectly consistent reference mask.
// berry_count is taken from the emitted mask (connected berry regions,
// no filters), not from the number of berries drawn, so overdrawn or
// merged berries cannot desynchronize it.
struct ScenePatch {
    GrayscaleImage image;
    BerryMask mask;
    int berry_count = 0;
    std::uint64_t seed = 0;
};

// Deterministic for (cfg, seed): identical bytes on every call.
ScenePatch generate_scene(const SceneConfig& cfg, std::uint64_t seed);

// Keep a pair only when the non-occluded mask has more than 1/24 of its
// pixels non-background and the occluded mask shows at least one
// non-background pixel. Throws on size mismatch.
bool passes_patch_filter(const BerryMask& occluded, const BerryMask& nonoccluded);

}  // namespace berrygan
