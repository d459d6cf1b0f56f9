#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "berrygan/config.hpp"
#include "berrygan/counting.hpp"
#include "berrygan/gan.hpp"
#include "berrygan/leaf.hpp"
#include "berrygan/manifest.hpp"
#include "berrygan/scene.hpp"

namespace berrygan {

// Everything a run needs, desk-sized out of the box. full_scale = true
// switches the geometry and budgets to the full-size values; the same keys
// can then still be overridden individually.
struct PipelineSettings {
    std::uint64_t seed = 1;
    bool full_scale = false;

    SceneConfig scene;
    int train_scenes = 512;
    int test_scenes = 128;

    int leaf_count = 24;
    int leaf_train_count = 18;
    int pairs_per_scene_train = 9;
    int pairs_per_scene_test = 3;
    // hard caps on kept pairs per split, 0 = keep all that pass the filter
    int pair_cap_train = 0;
    int pair_cap_test = 0;
    bool patch_filter = true;

    TrainConfig train;
    FilterConfig filters;

    int align_window = 656;
    int align_stride = 162;
    int resize_target = 286;

    int map_limit = 8;  // generation maps written per evaluation

    static PipelineSettings desk_defaults();
    // full_scale in cfg picks the base profile, remaining keys overlay it
    static PipelineSettings from_config(const Config& cfg);
    Config to_config() const;
    void validate() const;
};

std::uint64_t scene_seed_for(Split split, int index);

std::vector<LeafTemplate> leaf_bank_for(const PipelineSettings& s);

// Scenes at consecutive split seeds starting from start_index, occluded and
// filtered, until target_pairs are collected (multiplicity pairs per scene,
// capped). Used by in-memory callers; the disk stages below share the logic.
std::vector<PatchPair> build_pairs(const PipelineSettings& s, Split split, int scene_count,
                                   int multiplicity, int target_pairs);

// Load a pair (or a whole manifest) back from disk; paths resolve relative
// to the manifest file.
PatchPair pair_from_record(const std::string& manifest_path, const ManifestRecord& rec);
std::vector<PatchPair> load_pairs(const std::string& manifest_path);

// Pins a workdir to the exact settings that created it. The first call writes
// config.cfg; later calls with different settings fail instead of mixing
// outputs from two configurations.
void guard_config(const std::string& workdir, const PipelineSettings& s);

// Disk stages. Each is deterministic, writes under workdir, skips work whose
// outputs already exist, and wraps failures with its stage name.
void stage_gen_scenes(const PipelineSettings& s, const std::string& workdir, Split split);
void stage_augment(const PipelineSettings& s, const std::string& workdir, Split split);
// trains (or loads) a model under models/<name>.ckpt; returns the path
std::string stage_train(const PipelineSettings& s, const std::string& workdir,
                        const std::string& model_name);
void stage_infer(const PipelineSettings& s, const std::string& workdir,
                 const std::string& model_name, Split split);
void stage_count(const PipelineSettings& s, const std::string& workdir,
                 const std::string& model_name, Split split);

struct EvalSummary {
    int patches = 0;
    double r2_generated = 0.0;
    double r2_occluded = 0.0;
    double slope_generated = 0.0;
    double intercept_generated = 0.0;
    double mean_rel_diff_generated = 0.0;
    double mean_rel_diff_occluded = 0.0;
    int excluded_zero_reference = 0;
    double mean_iou_background = 0.0;
    double mean_iou_edge = 0.0;
    double mean_iou_berry = 0.0;
    double mean_iou_merged = 0.0;
    double mean_corr_non = 0.0;   // generated vs reference mask
    double mean_corr_occ = 0.0;   // reoccluded generated vs occluded mask
    double mean_agreement_visible = 0.0;  // pixel agreement outside the footprint
};

EvalSummary stage_evaluate(const PipelineSettings& s, const std::string& workdir,
                           const std::string& model_name, Split split);
void stage_report(const PipelineSettings& s, const std::string& workdir,
                  const std::string& model_name, Split split);

struct RecipeResult {
    std::string name;
    std::string workdir;
    // flat, sorted summary so reruns serialize identically
    std::map<std::string, double> stats;
};

// exp1: LA vs A on one scene set; exp2: occluded-domain correlation and
// generation maps; exp3: non-occluded IoU/correlation and size distributions;
// exp4: counting R2 and relative-difference histograms for both styles.
RecipeResult run_recipe(const std::string& name, const std::string& workdir,
                        const Config& overrides);

void write_recipe_stats(const std::string& path, const RecipeResult& result);

}  // namespace berrygan
