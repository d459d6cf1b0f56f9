#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "berrygan/image.hpp"
#include "berrygan/scene.hpp"

namespace berrygan {

enum class Split { Train, Test };

// Rotation angles (degrees) a leaf may be placed at.
inline constexpr std::array<int, 8> kLeafAngles = {-50, -30, -10, 0, 10, 30, 50, 70};

bool is_valid_leaf_angle(int angle_deg);

struct LeafTemplate {
    int id = 0;
    Footprint footprint;     // true = leaf pixel, 4-connected
    GrayscaleImage texture;  // same canvas, defined on footprint pixels
    Split split = Split::Train;
};

// Procedural stand-ins for photographed leaves: lobed star polygons with a
// radial vein texture. Deterministic per seed; ids run 0..count-1 with the
// first train_count templates in the train split.
std::vector<LeafTemplate> make_leaf_bank(int count, int train_count, int patch_size,
                                         std::uint64_t seed);

std::vector<LeafTemplate> filter_leaves(const std::vector<LeafTemplate>& bank, Split split);

struct PairProvenance {
    std::uint64_t scene_seed = 0;
    int leaf_id = -1;
    int angle = 0;
    int offset_x = 0;  // patch position of the rotated leaf canvas center
    int offset_y = 0;
};

struct PatchPair {
    GrayscaleImage occluded_image;
    BerryMask occluded_mask;
    GrayscaleImage nonoccluded_image;
    BerryMask nonoccluded_mask;
    Footprint leaf_footprint;  // in patch coordinates
    PairProvenance provenance;
};

// Overlay one leaf. The grayscale gets the rotated leaf texture (bilinear),
// the footprint is rotated nearest-neighbor so mask logic stays exact, and
// the occluded mask is produced by reocclude() below, which makes the
// construction-path identity reocclude(non_mask, footprint) == occ_mask hold
// by sharing code rather than by luck.
PatchPair occlude_with_leaf(const ScenePatch& scene, const LeafTemplate& leaf, int angle_deg,
                            int offset_x, int offset_y, bool allow_any_angle = false);

// Wipe the footprint to background, then grow a berry-edge band back in:
// three passes, each converting footprint background pixels 8-adjacent to
// the previous pass's berry front (pass one starts from surviving berry
// pixels). Gives truncated berries a closed contour about 3 px wide.
BerryMask reocclude(const BerryMask& mask, const Footprint& footprint);

// Per scene: 9 pairs for the train split, 3 for test, or an explicit
// override. Leaf and angle are drawn uniformly; placement retries until the
// rotated footprint touches the patch. Deterministic per seed, with the
// random stream split per scene so ordering is reproducible.
std::vector<PatchPair> augment_dataset(const std::vector<ScenePatch>& scenes,
                                       const std::vector<LeafTemplate>& leaf_pool, Split split,
                                       std::uint64_t seed, int pairs_per_scene = 0);

}  // namespace berrygan
