#include "berrygan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "berrygan/manifest.hpp"
#include "berrygan/metrics.hpp"
#include "berrygan/png_io.hpp"
#include "berrygan/svg.hpp"

namespace berrygan {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kOccColor = "#4878cf";
constexpr const char* kGenColor = "#e8803a";

std::string fmt_g(double v) {
    if (std::isnan(v)) return "nan";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string split_name(Split split) { return split == Split::Train ? "train" : "test"; }

std::string style_name(SceneStyle style) {
    return style == SceneStyle::Trained ? "trained" : "dense";
}

SceneStyle style_from_name(const std::string& name) {
    if (name == "trained") return SceneStyle::Trained;
    if (name == "dense") return SceneStyle::Dense;
    throw std::invalid_argument("unknown scene style '" + name + "'");
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string read_text_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& p, const std::string& text) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::string config_text(const Config& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.entries()) out += k + " = " + v + "\n";
    return out;
}

template <typename F>
auto labeled(const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("stage ") + stage + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("stage ") + stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

std::string scene_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%06d", index);
    return buf;
}

std::string pair_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%06d", index);
    return buf;
}

fs::path scenes_list_path(const std::string& workdir, Split split) {
    return fs::path(workdir) / "scenes" / (split_name(split) + ".jsonl");
}

fs::path pairs_manifest_path(const std::string& workdir, Split split) {
    return fs::path(workdir) / "pairs" / (split_name(split) + ".jsonl");
}

fs::path model_path(const std::string& workdir, const std::string& name) {
    return fs::path(workdir) / "models" / (name + ".ckpt");
}

fs::path generated_dir(const std::string& workdir, const std::string& model, Split split) {
    return fs::path(workdir) / "generated" / model / split_name(split);
}

fs::path report_dir(const std::string& workdir, const std::string& model) {
    return fs::path(workdir) / "reports" / model;
}

struct SceneRow {
    std::string id;
    std::uint64_t seed = 0;
    std::string image;
    std::string mask;
    int berry_count = 0;
};

std::vector<SceneRow> read_scene_rows(const fs::path& list_path) {
    std::ifstream in(list_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scene list " + list_path.string());
    std::vector<SceneRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        SceneRow r;
        r.id = j.at("id").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.image = j.at("image").get<std::string>();
        r.mask = j.at("mask").get<std::string>();
        r.berry_count = j.at("berry_count").get<int>();
        rows.push_back(std::move(r));
    }
    return rows;
}

ScenePatch scene_from_row(const fs::path& list_path, const SceneRow& row) {
    fs::path dir = list_path.parent_path();
    ScenePatch scene;
    scene.image = read_png_gray((dir / row.image).string());
    scene.mask = read_png_mask((dir / row.mask).string());
    scene.berry_count = row.berry_count;
    scene.seed = row.seed;
    return scene;
}

// Keep/drop decision shared by the disk stage and the in-memory builder.
bool keep_pair(const PipelineSettings& s, const PatchPair& pair) {
    return !s.patch_filter || passes_patch_filter(pair.occluded_mask, pair.nonoccluded_mask);
}

BerryMask merge_edge_class(const BerryMask& m) {
    BerryMask out = m;
    for (auto& v : out.pixels)
        if (v == kBerryEdge) v = kBerry;
    return out;
}

// Pixel agreement between the generated and conditioning mask outside the
// leaf footprint; empty when the leaf covers the whole crop.
std::optional<double> visible_agreement(const BerryMask& gen, const BerryMask& occ,
                                        const Footprint& fp) {
    std::int64_t visible = 0, equal = 0;
    for (int y = 0; y < gen.height; ++y) {
        for (int x = 0; x < gen.width; ++x) {
            if (fp.at(x, y)) continue;
            ++visible;
            if (gen.at(x, y) == occ.at(x, y)) ++equal;
        }
    }
    if (visible == 0) return std::nullopt;
    return static_cast<double>(equal) / static_cast<double>(visible);
}

struct MeanAcc {
    double sum = 0.0;
    int n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    void add(const std::optional<double>& v) {
        if (v) add(*v);
    }
    double mean() const { return n ? sum / n : std::numeric_limits<double>::quiet_NaN(); }
};

std::optional<RSquared> safe_r2(const std::vector<double>& predicted,
                                const std::vector<double>& reference) {
    if (reference.size() < 2) return std::nullopt;
    double lo = *std::min_element(reference.begin(), reference.end());
    double hi = *std::max_element(reference.begin(), reference.end());
    if (lo == hi) return std::nullopt;
    return r_squared(predicted, reference);
}

struct EvalRow {
    std::string id;
    int ref_count = 0;
    int occ_count = 0;
    int gen_count = 0;
    double iou_background = 0.0;
    double iou_edge = 0.0;
    double iou_berry = 0.0;
    double iou_merged = 0.0;
    std::optional<double> corr_non;
    std::optional<double> corr_occ;
    std::optional<double> agree_visible;
};

struct EvalData {
    std::vector<EvalRow> rows;
    EvalSummary summary;
    RelativeDifferenceHistogram hist;
};

fs::path generated_mask_path(const std::string& workdir, const std::string& model, Split split,
                             const std::string& id) {
    return generated_dir(workdir, model, split) / (id + "_mask.png");
}

EvalData compute_eval(const PipelineSettings& s, const std::string& workdir,
                      const std::string& model_name, Split split) {
    fs::path manifest = pairs_manifest_path(workdir, split);
    std::vector<ManifestRecord> records = read_manifest(manifest.string());

    EvalData data;
    CountComparison comparison;
    MeanAcc bg, edge, berry, merged, corr_non, corr_occ, agree;
    std::vector<double> refs, occs, gens;

    for (const ManifestRecord& rec : records) {
        PatchPair pair = pair_from_record(manifest.string(), rec);
        PatchPair crop = crop_pair_center(pair, s.train.crop_size);
        BerryMask gen = read_png_mask(generated_mask_path(workdir, model_name, split, rec.id).string());

        EvalRow row;
        row.id = rec.id;
        row.ref_count = count_berries(crop.nonoccluded_mask, s.filters).accepted_count;
        row.occ_count = count_berries(crop.occluded_mask, s.filters).accepted_count;
        row.gen_count = count_berries(gen, s.filters).accepted_count;
        row.iou_background = iou(crop.nonoccluded_mask, gen, MaskClass::Background);
        row.iou_edge = iou(crop.nonoccluded_mask, gen, MaskClass::BerryEdge);
        row.iou_berry = iou(crop.nonoccluded_mask, gen, MaskClass::Berry);
        row.iou_merged =
            iou(merge_edge_class(crop.nonoccluded_mask), merge_edge_class(gen), MaskClass::Berry);
        row.corr_non = pearson_correlation(gen, crop.nonoccluded_mask);
        row.corr_occ =
            pearson_correlation(reocclude(gen, crop.leaf_footprint), crop.occluded_mask);
        row.agree_visible = visible_agreement(gen, crop.occluded_mask, crop.leaf_footprint);

        bg.add(row.iou_background);
        edge.add(row.iou_edge);
        berry.add(row.iou_berry);
        merged.add(row.iou_merged);
        corr_non.add(row.corr_non);
        corr_occ.add(row.corr_occ);
        agree.add(row.agree_visible);
        refs.push_back(row.ref_count);
        occs.push_back(row.occ_count);
        gens.push_back(row.gen_count);
        comparison.counts.push_back({static_cast<double>(row.ref_count),
                                     static_cast<double>(row.occ_count),
                                     static_cast<double>(row.gen_count)});
        data.rows.push_back(std::move(row));
    }

    data.hist = relative_difference_histogram(comparison);

    EvalSummary& sum = data.summary;
    sum.patches = static_cast<int>(data.rows.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto gen_fit = safe_r2(gens, refs);
    auto occ_fit = safe_r2(occs, refs);
    sum.r2_generated = gen_fit ? gen_fit->r2 : nan;
    sum.r2_occluded = occ_fit ? occ_fit->r2 : nan;
    sum.slope_generated = gen_fit ? gen_fit->slope : nan;
    sum.intercept_generated = gen_fit ? gen_fit->intercept : nan;
    sum.mean_rel_diff_generated = data.hist.mean_generated;
    sum.mean_rel_diff_occluded = data.hist.mean_occluded;
    sum.excluded_zero_reference = data.hist.excluded_zero_reference;
    sum.mean_iou_background = bg.mean();
    sum.mean_iou_edge = edge.mean();
    sum.mean_iou_berry = berry.mean();
    sum.mean_iou_merged = merged.mean();
    sum.mean_corr_non = corr_non.mean();
    sum.mean_corr_occ = corr_occ.mean();
    sum.mean_agreement_visible = agree.mean();
    return data;
}

std::string rel_diff_csv(const RelativeDifferenceHistogram& hist) {
    std::string out = "bin_lo,bin_hi,occluded,generated\n";
    for (const HistogramBin& b : hist.bins) {
        out += fmt_g(b.lo) + "," + fmt_g(b.hi) + "," + std::to_string(b.occluded) + "," +
               std::to_string(b.generated) + "\n";
    }
    return out;
}

std::string summary_csv(const EvalSummary& s) {
    std::string out = "metric,value\n";
    auto row = [&](const char* k, double v) { out += std::string(k) + "," + fmt_g(v) + "\n"; };
    row("patches", s.patches);
    row("r2_generated", s.r2_generated);
    row("r2_occluded", s.r2_occluded);
    row("slope_generated", s.slope_generated);
    row("intercept_generated", s.intercept_generated);
    row("mean_rel_diff_generated", s.mean_rel_diff_generated);
    row("mean_rel_diff_occluded", s.mean_rel_diff_occluded);
    row("excluded_zero_reference", s.excluded_zero_reference);
    row("mean_iou_background", s.mean_iou_background);
    row("mean_iou_edge", s.mean_iou_edge);
    row("mean_iou_berry", s.mean_iou_berry);
    row("mean_iou_merged", s.mean_iou_merged);
    row("mean_corr_non", s.mean_corr_non);
    row("mean_corr_occ", s.mean_corr_occ);
    row("mean_agreement_visible", s.mean_agreement_visible);
    return out;
}

void write_generation_maps(const PipelineSettings& s, const std::string& workdir,
                           const std::string& model_name, Split split,
                           const std::vector<ManifestRecord>& records) {
    fs::path manifest = pairs_manifest_path(workdir, split);
    fs::path dir = report_dir(workdir, model_name) / "maps";
    int limit = std::min<int>(s.map_limit, static_cast<int>(records.size()));
    for (int i = 0; i < limit; ++i) {
        const ManifestRecord& rec = records[i];
        PatchPair pair = pair_from_record(manifest.string(), rec);
        PatchPair crop = crop_pair_center(pair, s.train.crop_size);
        BerryMask gen = read_png_mask(generated_mask_path(workdir, model_name, split, rec.id).string());
        GenerationMap three = generation_map(crop.nonoccluded_mask, gen, GenerationMapMode::ThreeClass);
        GenerationMap two = generation_map(crop.nonoccluded_mask, gen, GenerationMapMode::TwoClass);
        ensure_parent(dir / "x");
        write_png_rgb((dir / (rec.id + "_three_class.png")).string(), three.width, three.height,
                      render_generation_map(three));
        write_png_rgb((dir / (rec.id + "_two_class.png")).string(), two.width, two.height,
                      render_generation_map(two));
    }
}

}  // namespace

PipelineSettings PipelineSettings::desk_defaults() {
    PipelineSettings s;
    s.scene.seed = s.seed;
    s.scene.patch_size = 72;
    s.scene.bunches_per_patch = {1, 2};
    s.scene.berries_per_bunch = {5, 12};
    s.scene.berry_radius = {6, 9};
    s.scene.edge_width = 2;
    s.scene.branch_count = {1, 3};
    s.scene.background_level = {165, 232};
    s.scene.style = SceneStyle::Trained;
    return s;
}

namespace {

PipelineSettings full_profile() {
    PipelineSettings s;
    s.full_scale = true;
    s.scene = SceneConfig{};  // full-size geometry: 286 px patches
    s.scene.seed = s.seed;
    s.train.crop_size = 256;
    s.train.base_channels = 64;
    s.train.depth = 8;
    s.train.disc_layers = 3;
    s.train.epochs = 600;
    return s;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "align_stride",     "align_window",
        "background_hi",    "background_lo",
        "base_channels",    "batch_size",
        "berries_hi",       "berries_lo",
        "beta1",            "beta2",
        "branches_hi",      "branches_lo",
        "bunches_hi",       "bunches_lo",
        "count_area_ratio", "count_area_ratio_enabled",
        "count_axis_ratio", "count_axis_ratio_enabled",
        "count_edge_coverage", "count_edge_coverage_enabled",
        "count_min_area",   "count_min_area_enabled",
        "crop_size",        "depth",
        "disc_layers",      "dropout",
        "edge_width",       "epochs",
        "full_scale",       "input_mode",
        "lambda_l1",
        "leaf_count",       "leaf_train_count",
        "literal_generator_label", "lr",
        "map_limit",
        "pair_cap_test",    "pair_cap_train",
        "pairs_per_scene_test", "pairs_per_scene_train",
        "patch_filter",     "radius_hi",
        "radius_lo",        "resize_target",
        "scene_patch",      "seed",
        "style",            "test_scenes",
        "train_scenes",     "upsample_conv",
    };
    return keys;
}

}  // namespace

PipelineSettings PipelineSettings::from_config(const Config& cfg) {
    for (const auto& [k, v] : cfg.entries()) {
        if (!known_keys().count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
    }

    PipelineSettings s =
        cfg.get_bool("full_scale", false) ? full_profile() : desk_defaults();

    s.seed = cfg.get_u64("seed", s.seed);
    s.scene.patch_size = cfg.get_int("scene_patch", s.scene.patch_size);
    s.scene.style = style_from_name(cfg.get_string("style", style_name(s.scene.style)));
    s.scene.bunches_per_patch.lo = cfg.get_int("bunches_lo", s.scene.bunches_per_patch.lo);
    s.scene.bunches_per_patch.hi = cfg.get_int("bunches_hi", s.scene.bunches_per_patch.hi);
    s.scene.berries_per_bunch.lo = cfg.get_int("berries_lo", s.scene.berries_per_bunch.lo);
    s.scene.berries_per_bunch.hi = cfg.get_int("berries_hi", s.scene.berries_per_bunch.hi);
    s.scene.berry_radius.lo = cfg.get_int("radius_lo", s.scene.berry_radius.lo);
    s.scene.berry_radius.hi = cfg.get_int("radius_hi", s.scene.berry_radius.hi);
    s.scene.edge_width = cfg.get_int("edge_width", s.scene.edge_width);
    s.scene.branch_count.lo = cfg.get_int("branches_lo", s.scene.branch_count.lo);
    s.scene.branch_count.hi = cfg.get_int("branches_hi", s.scene.branch_count.hi);
    s.scene.background_level.lo = cfg.get_int("background_lo", s.scene.background_level.lo);
    s.scene.background_level.hi = cfg.get_int("background_hi", s.scene.background_level.hi);

    s.train_scenes = cfg.get_int("train_scenes", s.train_scenes);
    s.test_scenes = cfg.get_int("test_scenes", s.test_scenes);
    s.leaf_count = cfg.get_int("leaf_count", s.leaf_count);
    s.leaf_train_count = cfg.get_int("leaf_train_count", s.leaf_train_count);
    s.pairs_per_scene_train = cfg.get_int("pairs_per_scene_train", s.pairs_per_scene_train);
    s.pairs_per_scene_test = cfg.get_int("pairs_per_scene_test", s.pairs_per_scene_test);
    s.pair_cap_train = cfg.get_int("pair_cap_train", s.pair_cap_train);
    s.pair_cap_test = cfg.get_int("pair_cap_test", s.pair_cap_test);
    s.patch_filter = cfg.get_bool("patch_filter", s.patch_filter);

    s.train.input_mode =
        input_mode_from_string(cfg.get_string("input_mode", to_string(s.train.input_mode)));
    s.train.crop_size = cfg.get_int("crop_size", s.train.crop_size);
    s.train.base_channels = cfg.get_int("base_channels", s.train.base_channels);
    s.train.depth = cfg.get_int("depth", s.train.depth);
    s.train.disc_layers = cfg.get_int("disc_layers", s.train.disc_layers);
    s.train.epochs = cfg.get_int("epochs", s.train.epochs);
    s.train.lr = cfg.get_double("lr", s.train.lr);
    s.train.lambda_l1 = cfg.get_double("lambda_l1", s.train.lambda_l1);
    s.train.batch_size = cfg.get_int("batch_size", s.train.batch_size);
    s.train.beta1 = cfg.get_double("beta1", s.train.beta1);
    s.train.beta2 = cfg.get_double("beta2", s.train.beta2);
    s.train.upsample_conv = cfg.get_bool("upsample_conv", s.train.upsample_conv);
    s.train.dropout = cfg.get_double("dropout", s.train.dropout);
    s.train.literal_generator_label =
        cfg.get_bool("literal_generator_label", s.train.literal_generator_label);

    s.filters.min_area_enabled = cfg.get_bool("count_min_area_enabled", s.filters.min_area_enabled);
    s.filters.min_area = cfg.get_int("count_min_area", s.filters.min_area);
    s.filters.axis_ratio_enabled =
        cfg.get_bool("count_axis_ratio_enabled", s.filters.axis_ratio_enabled);
    s.filters.min_axis_ratio = cfg.get_double("count_axis_ratio", s.filters.min_axis_ratio);
    s.filters.area_ratio_enabled =
        cfg.get_bool("count_area_ratio_enabled", s.filters.area_ratio_enabled);
    s.filters.min_area_ratio = cfg.get_double("count_area_ratio", s.filters.min_area_ratio);
    s.filters.edge_coverage_enabled =
        cfg.get_bool("count_edge_coverage_enabled", s.filters.edge_coverage_enabled);
    s.filters.min_edge_coverage = cfg.get_double("count_edge_coverage", s.filters.min_edge_coverage);

    s.align_window = cfg.get_int("align_window", s.align_window);
    s.align_stride = cfg.get_int("align_stride", s.align_stride);
    s.resize_target = cfg.get_int("resize_target", s.resize_target);
    s.map_limit = cfg.get_int("map_limit", s.map_limit);

    s.scene.seed = s.seed;
    s.train.seed = s.seed;
    return s;
}

Config PipelineSettings::to_config() const {
    Config c;
    auto set_int = [&](const char* k, long long v) { c.set(k, std::to_string(v)); };
    auto set_dbl = [&](const char* k, double v) { c.set(k, fmt_g(v)); };
    auto set_bool = [&](const char* k, bool v) { c.set(k, v ? "true" : "false"); };

    set_int("seed", static_cast<long long>(seed));
    set_bool("full_scale", full_scale);
    set_int("scene_patch", scene.patch_size);
    c.set("style", style_name(scene.style));
    set_int("bunches_lo", scene.bunches_per_patch.lo);
    set_int("bunches_hi", scene.bunches_per_patch.hi);
    set_int("berries_lo", scene.berries_per_bunch.lo);
    set_int("berries_hi", scene.berries_per_bunch.hi);
    set_int("radius_lo", scene.berry_radius.lo);
    set_int("radius_hi", scene.berry_radius.hi);
    set_int("edge_width", scene.edge_width);
    set_int("branches_lo", scene.branch_count.lo);
    set_int("branches_hi", scene.branch_count.hi);
    set_int("background_lo", scene.background_level.lo);
    set_int("background_hi", scene.background_level.hi);
    set_int("train_scenes", train_scenes);
    set_int("test_scenes", test_scenes);
    set_int("leaf_count", leaf_count);
    set_int("leaf_train_count", leaf_train_count);
    set_int("pairs_per_scene_train", pairs_per_scene_train);
    set_int("pairs_per_scene_test", pairs_per_scene_test);
    set_int("pair_cap_train", pair_cap_train);
    set_int("pair_cap_test", pair_cap_test);
    set_bool("patch_filter", patch_filter);
    c.set("input_mode", to_string(train.input_mode));
    set_int("crop_size", train.crop_size);
    set_int("base_channels", train.base_channels);
    set_int("depth", train.depth);
    set_int("disc_layers", train.disc_layers);
    set_int("epochs", train.epochs);
    set_dbl("lr", train.lr);
    set_dbl("lambda_l1", train.lambda_l1);
    set_int("batch_size", train.batch_size);
    set_dbl("beta1", train.beta1);
    set_dbl("beta2", train.beta2);
    set_bool("upsample_conv", train.upsample_conv);
    set_dbl("dropout", train.dropout);
    set_bool("literal_generator_label", train.literal_generator_label);
    set_bool("count_min_area_enabled", filters.min_area_enabled);
    set_int("count_min_area", filters.min_area);
    set_bool("count_axis_ratio_enabled", filters.axis_ratio_enabled);
    set_dbl("count_axis_ratio", filters.min_axis_ratio);
    set_bool("count_area_ratio_enabled", filters.area_ratio_enabled);
    set_dbl("count_area_ratio", filters.min_area_ratio);
    set_bool("count_edge_coverage_enabled", filters.edge_coverage_enabled);
    set_dbl("count_edge_coverage", filters.min_edge_coverage);
    set_int("align_window", align_window);
    set_int("align_stride", align_stride);
    set_int("resize_target", resize_target);
    set_int("map_limit", map_limit);
    return c;
}

void PipelineSettings::validate() const {
    scene.validate();
    train.validate();
    if (scene.seed != seed || train.seed != seed)
        throw std::invalid_argument("settings: component seeds out of sync");
    if (train.crop_size > scene.patch_size)
        throw std::invalid_argument("settings: crop_size exceeds scene_patch");
    if (train_scenes < 1 || test_scenes < 1)
        throw std::invalid_argument("settings: need at least one scene per split");
    if (leaf_count < 2 || leaf_train_count < 1 || leaf_train_count >= leaf_count)
        throw std::invalid_argument("settings: leaf split must leave both pools non-empty");
    if (pairs_per_scene_train < 1 || pairs_per_scene_test < 1)
        throw std::invalid_argument("settings: pairs per scene must be positive");
    if (pair_cap_train < 0 || pair_cap_test < 0)
        throw std::invalid_argument("settings: pair caps cannot be negative");
    if (align_window < 1 || align_stride < 1 || resize_target < 1)
        throw std::invalid_argument("settings: alignment sizes must be positive");
    if (map_limit < 0) throw std::invalid_argument("settings: map_limit cannot be negative");
}

std::uint64_t scene_seed_for(Split split, int index) {
    // disjoint seed ranges keep the manifest split check meaningful
    return (split == Split::Train ? 100000ULL : 900000ULL) + static_cast<std::uint64_t>(index);
}

std::vector<LeafTemplate> leaf_bank_for(const PipelineSettings& s) {
    return make_leaf_bank(s.leaf_count, s.leaf_train_count, s.scene.patch_size, s.seed);
}

std::vector<PatchPair> build_pairs(const PipelineSettings& s, Split split, int scene_count,
                                   int multiplicity, int target_pairs) {
    if (scene_count <= 0 && target_pairs <= 0)
        throw std::invalid_argument("build_pairs: need a scene count or a pair target");
    std::vector<LeafTemplate> pool = filter_leaves(leaf_bank_for(s), split);

    std::vector<PatchPair> out;
    int max_scenes = scene_count > 0 ? scene_count : std::max(1000, 50 * target_pairs);
    for (int i = 0; i < max_scenes; ++i) {
        if (target_pairs > 0 && static_cast<int>(out.size()) >= target_pairs) break;
        std::vector<ScenePatch> one{generate_scene(s.scene, scene_seed_for(split, i))};
        for (PatchPair& pair : augment_dataset(one, pool, split, s.seed, multiplicity)) {
            if (!keep_pair(s, pair)) continue;
            out.push_back(std::move(pair));
            if (target_pairs > 0 && static_cast<int>(out.size()) >= target_pairs) break;
        }
    }
    if (target_pairs > 0 && static_cast<int>(out.size()) < target_pairs)
        throw std::runtime_error("build_pairs: collected " + std::to_string(out.size()) + " of " +
                                 std::to_string(target_pairs) + " pairs");
    return out;
}

PatchPair pair_from_record(const std::string& manifest_path, const ManifestRecord& rec) {
    PatchPair pair;
    pair.occluded_image = read_png_gray(resolve_manifest_path(manifest_path, rec.occluded_image));
    pair.occluded_mask = read_png_mask(resolve_manifest_path(manifest_path, rec.occluded_mask));
    pair.nonoccluded_image =
        read_png_gray(resolve_manifest_path(manifest_path, rec.nonoccluded_image));
    pair.nonoccluded_mask =
        read_png_mask(resolve_manifest_path(manifest_path, rec.nonoccluded_mask));
    pair.leaf_footprint = read_png_footprint(resolve_manifest_path(manifest_path, rec.footprint));
    pair.provenance.scene_seed = rec.scene_seed;
    pair.provenance.leaf_id = rec.leaf_id;
    pair.provenance.angle = rec.angle;
    pair.provenance.offset_x = rec.offset_x;
    pair.provenance.offset_y = rec.offset_y;
    return pair;
}

std::vector<PatchPair> load_pairs(const std::string& manifest_path) {
    std::vector<PatchPair> out;
    for (const ManifestRecord& rec : read_manifest(manifest_path)) {
        out.push_back(pair_from_record(manifest_path, rec));
    }
    return out;
}

void stage_gen_scenes(const PipelineSettings& s, const std::string& workdir, Split split) {
    labeled("gen-scenes", [&] {
        int count = split == Split::Train ? s.train_scenes : s.test_scenes;
        fs::path list_path = scenes_list_path(workdir, split);
        if (fs::exists(list_path)) {
            int have = static_cast<int>(read_scene_rows(list_path).size());
            if (have != count)
                throw std::runtime_error("scene list " + list_path.string() + " holds " +
                                         std::to_string(have) + " rows, expected " +
                                         std::to_string(count) + "; use a fresh workdir");
            return;
        }

        fs::path dir = list_path.parent_path() / split_name(split);
        fs::create_directories(dir);
        std::string lines;
        for (int i = 0; i < count; ++i) {
            ScenePatch scene = generate_scene(s.scene, scene_seed_for(split, i));
            std::string id = scene_id(i);
            std::string image_rel = split_name(split) + "/" + id + "_image.png";
            std::string mask_rel = split_name(split) + "/" + id + "_mask.png";
            write_png_gray((list_path.parent_path() / image_rel).string(), scene.image);
            write_png_gray((list_path.parent_path() / mask_rel).string(), scene.mask);
            ordered_json j;
            j["id"] = id;
            j["split"] = split_name(split);
            j["style"] = style_name(s.scene.style);
            j["seed"] = scene.seed;
            j["image"] = image_rel;
            j["mask"] = mask_rel;
            j["berry_count"] = scene.berry_count;
            lines += j.dump() + "\n";
        }
        write_text_file(list_path, lines);
        std::fprintf(stderr, "[gen-scenes] %s: %d scenes\n", split_name(split).c_str(), count);
    });
}

void stage_augment(const PipelineSettings& s, const std::string& workdir, Split split) {
    labeled("augment", [&] {
        fs::path manifest = pairs_manifest_path(workdir, split);
        if (fs::exists(manifest)) {
            read_manifest(manifest.string());  // still validated on skip
            return;
        }

        fs::path list_path = scenes_list_path(workdir, split);
        std::vector<SceneRow> scenes = read_scene_rows(list_path);
        std::vector<LeafTemplate> pool = filter_leaves(leaf_bank_for(s), split);
        int multiplicity =
            split == Split::Train ? s.pairs_per_scene_train : s.pairs_per_scene_test;
        int cap = split == Split::Train ? s.pair_cap_train : s.pair_cap_test;

        fs::path dir = manifest.parent_path() / split_name(split);
        fs::create_directories(dir);
        std::vector<ManifestRecord> records;
        int next = 0;
        for (const SceneRow& row : scenes) {
            if (cap > 0 && next >= cap) break;
            std::vector<ScenePatch> one{scene_from_row(list_path, row)};
            for (PatchPair& pair : augment_dataset(one, pool, split, s.seed, multiplicity)) {
                if (cap > 0 && next >= cap) break;
                if (!keep_pair(s, pair)) continue;
                std::string id = pair_id(next++);
                std::string base = split_name(split) + "/" + id;
                ManifestRecord rec;
                rec.id = id;
                rec.split = split_name(split);
                rec.style = style_name(s.scene.style);
                rec.occluded_image = base + "_occ.png";
                rec.occluded_mask = base + "_occ_mask.png";
                rec.nonoccluded_image = base + "_non.png";
                rec.nonoccluded_mask = base + "_non_mask.png";
                rec.footprint = base + "_leaf.png";
                rec.scene_seed = pair.provenance.scene_seed;
                rec.leaf_id = pair.provenance.leaf_id;
                rec.angle = pair.provenance.angle;
                rec.offset_x = pair.provenance.offset_x;
                rec.offset_y = pair.provenance.offset_y;
                rec.berry_count = row.berry_count;
                fs::path root = manifest.parent_path();
                write_png_gray((root / rec.occluded_image).string(), pair.occluded_image);
                write_png_gray((root / rec.occluded_mask).string(), pair.occluded_mask);
                write_png_gray((root / rec.nonoccluded_image).string(), pair.nonoccluded_image);
                write_png_gray((root / rec.nonoccluded_mask).string(), pair.nonoccluded_mask);
                write_png_footprint((root / rec.footprint).string(), pair.leaf_footprint);
                records.push_back(std::move(rec));
            }
        }
        if (records.empty())
            throw std::runtime_error("no pairs survived the patch filter for split " +
                                     split_name(split));
        write_manifest(manifest.string(), records);
        std::fprintf(stderr, "[augment] %s: %zu pairs\n", split_name(split).c_str(),
                     records.size());
    });
}

std::string stage_train(const PipelineSettings& s, const std::string& workdir,
                        const std::string& model_name) {
    return labeled("train", [&] {
        fs::path ckpt = model_path(workdir, model_name);
        if (fs::exists(ckpt)) {
            std::fprintf(stderr, "[train %s] checkpoint exists, skipping\n", model_name.c_str());
            return ckpt.string();
        }

        std::vector<PatchPair> pairs =
            load_pairs(pairs_manifest_path(workdir, Split::Train).string());
        GanModel model = make_model(s.train);
        std::vector<EpochLoss> history =
            train(model, pairs, [&](const EpochLoss& e) {
                std::fprintf(stderr, "[train %s] epoch %d/%d lr=%.6f d=%.4f g=%.4f l1=%.4f\n",
                             model_name.c_str(), e.epoch + 1, s.train.epochs, e.lr, e.d_loss,
                             e.g_loss, e.g_l1);
                std::fflush(stderr);
            });
        fs::create_directories(ckpt.parent_path());
        write_loss_csv((ckpt.parent_path() / (model_name + "_loss.csv")).string(), history);
        save_checkpoint(ckpt.string(), model);
        return ckpt.string();
    });
}

void stage_infer(const PipelineSettings& s, const std::string& workdir,
                 const std::string& model_name, Split split) {
    labeled("infer", [&] {
        GanModel model = load_checkpoint(model_path(workdir, model_name).string());
        if (model.cfg.crop_size != s.train.crop_size)
            throw std::runtime_error("checkpoint crop size " + std::to_string(model.cfg.crop_size) +
                                     " does not match configured " +
                                     std::to_string(s.train.crop_size));

        fs::path manifest = pairs_manifest_path(workdir, split);
        std::vector<ManifestRecord> records = read_manifest(manifest.string());
        fs::path dir = generated_dir(workdir, model_name, split);
        fs::create_directories(dir);
        for (const ManifestRecord& rec : records) {
            PatchPair pair = pair_from_record(manifest.string(), rec);
            PatchPair crop = crop_pair_center(pair, s.train.crop_size);
            InferResult res =
                infer_pair(*model.gen, model.cfg.input_mode, crop.occluded_image,
                           crop.occluded_mask);
            write_png_gray((dir / (rec.id + "_raw.png")).string(), res.raw_mask);
            write_png_gray((dir / (rec.id + "_mask.png")).string(), quantize_mask(res.raw_mask));
            if (res.has_image)
                write_png_gray((dir / (rec.id + "_image.png")).string(), res.image);
        }
        std::fprintf(stderr, "[infer %s] %s: %zu patches\n", model_name.c_str(),
                     split_name(split).c_str(), records.size());
    });
}

void stage_count(const PipelineSettings& s, const std::string& workdir,
                 const std::string& model_name, Split split) {
    labeled("count", [&] {
        fs::path manifest = pairs_manifest_path(workdir, split);
        std::vector<ManifestRecord> records = read_manifest(manifest.string());
        std::string csv =
            "id,reference,occluded,generated,gen_raw_components,gen_rejected_min_area,"
            "gen_rejected_axis_ratio,gen_rejected_area,gen_rejected_edge\n";
        for (const ManifestRecord& rec : records) {
            PatchPair pair = pair_from_record(manifest.string(), rec);
            PatchPair crop = crop_pair_center(pair, s.train.crop_size);
            BerryMask gen =
                read_png_mask(generated_mask_path(workdir, model_name, split, rec.id).string());
            CountReport ref = count_berries(crop.nonoccluded_mask, s.filters);
            CountReport occ = count_berries(crop.occluded_mask, s.filters);
            CountReport out = count_berries(gen, s.filters);
            csv += rec.id + "," + std::to_string(ref.accepted_count) + "," +
                   std::to_string(occ.accepted_count) + "," + std::to_string(out.accepted_count) +
                   "," + std::to_string(out.raw_component_count) + "," +
                   std::to_string(out.rejected_min_area) + "," +
                   std::to_string(out.rejected_axis_ratio) + "," +
                   std::to_string(out.rejected_area_vs_expected) + "," +
                   std::to_string(out.rejected_edge_coverage) + "\n";
        }
        write_text_file(report_dir(workdir, model_name) /
                            ("counts_" + split_name(split) + ".csv"),
                        csv);
    });
}

EvalSummary stage_evaluate(const PipelineSettings& s, const std::string& workdir,
                           const std::string& model_name, Split split) {
    return labeled("evaluate", [&] {
        EvalData data = compute_eval(s, workdir, model_name, split);

        std::string csv =
            "id,reference,occluded,generated,iou_background,iou_edge,iou_berry,iou_merged,"
            "corr_non,corr_occ,agree_visible\n";
        auto opt = [](const std::optional<double>& v) {
            return v ? fmt_g(*v) : std::string("nan");
        };
        for (const EvalRow& r : data.rows) {
            csv += r.id + "," + std::to_string(r.ref_count) + "," + std::to_string(r.occ_count) +
                   "," + std::to_string(r.gen_count) + "," + fmt_g(r.iou_background) + "," +
                   fmt_g(r.iou_edge) + "," + fmt_g(r.iou_berry) + "," + fmt_g(r.iou_merged) + "," +
                   opt(r.corr_non) + "," + opt(r.corr_occ) + "," + opt(r.agree_visible) + "\n";
        }
        fs::path dir = report_dir(workdir, model_name);
        write_text_file(dir / ("eval_" + split_name(split) + ".csv"), csv);
        write_text_file(dir / ("rel_diff_" + split_name(split) + ".csv"),
                        rel_diff_csv(data.hist));
        write_text_file(dir / ("summary_" + split_name(split) + ".csv"),
                        summary_csv(data.summary));

        std::vector<ManifestRecord> records =
            read_manifest(pairs_manifest_path(workdir, split).string());
        write_generation_maps(s, workdir, model_name, split, records);
        return data.summary;
    });
}

void stage_report(const PipelineSettings& s, const std::string& workdir,
                  const std::string& model_name, Split split) {
    labeled("report", [&] {
        EvalData data = compute_eval(s, workdir, model_name, split);
        fs::path dir = report_dir(workdir, model_name);

        ScatterSeries occ{"occluded", kOccColor, {}};
        ScatterSeries gen{"generated", kGenColor, {}};
        std::vector<double> refs, occs, gens;
        for (const EvalRow& r : data.rows) {
            occ.points.push_back({static_cast<double>(r.ref_count),
                                  static_cast<double>(r.occ_count)});
            gen.points.push_back({static_cast<double>(r.ref_count),
                                  static_cast<double>(r.gen_count)});
            refs.push_back(r.ref_count);
            occs.push_back(r.occ_count);
            gens.push_back(r.gen_count);
        }
        std::vector<LineSpec> lines;
        if (auto fit = safe_r2(occs, refs))
            lines.push_back({"occluded fit", kOccColor, fit->slope, fit->intercept});
        if (auto fit = safe_r2(gens, refs))
            lines.push_back({"generated fit", kGenColor, fit->slope, fit->intercept});
        write_scatter_svg((dir / ("scatter_" + split_name(split) + ".svg")).string(),
                          "berry counts on " + split_name(split) + " patches",
                          "reference count", "estimated count", {occ, gen}, true, lines);

        std::vector<std::string> labels;
        HistogramSeries occ_h{"occluded", kOccColor, {}};
        HistogramSeries gen_h{"generated", kGenColor, {}};
        for (const HistogramBin& b : data.hist.bins) {
            labels.push_back(fmt_g(b.lo));
            occ_h.heights.push_back(static_cast<double>(b.occluded));
            gen_h.heights.push_back(static_cast<double>(b.generated));
        }
        write_histogram_svg((dir / ("rel_diff_" + split_name(split) + ".svg")).string(),
                            "relative count difference on " + split_name(split) + " patches",
                            "(estimate - reference) / reference", labels, {occ_h, gen_h});
    });
}

void guard_config(const std::string& workdir, const PipelineSettings& s) {
    fs::path p = fs::path(workdir) / "config.cfg";
    std::string text = config_text(s.to_config());
    if (fs::exists(p)) {
        if (read_text_file(p) != text)
            throw std::runtime_error("workdir " + workdir +
                                     " was built with different settings; use a fresh workdir");
        return;
    }
    write_text_file(p, text);
}

namespace {

std::string model_name_for(InputMode mode) { return mode == InputMode::LA ? "la" : "a"; }

void prepare_dataset(const PipelineSettings& s, const std::string& workdir) {
    stage_gen_scenes(s, workdir, Split::Train);
    stage_gen_scenes(s, workdir, Split::Test);
    stage_augment(s, workdir, Split::Train);
    stage_augment(s, workdir, Split::Test);
}

EvalSummary run_model_chain(const PipelineSettings& s, const std::string& workdir,
                            const std::string& model_name) {
    stage_train(s, workdir, model_name);
    stage_infer(s, workdir, model_name, Split::Test);
    stage_count(s, workdir, model_name, Split::Test);
    EvalSummary summary = stage_evaluate(s, workdir, model_name, Split::Test);
    stage_report(s, workdir, model_name, Split::Test);
    return summary;
}

void add_summary_stats(RecipeResult& res, const std::string& prefix, const EvalSummary& e) {
    res.stats[prefix + "patches"] = e.patches;
    res.stats[prefix + "r2_generated"] = e.r2_generated;
    res.stats[prefix + "r2_occluded"] = e.r2_occluded;
    res.stats[prefix + "mean_rel_diff_generated"] = e.mean_rel_diff_generated;
    res.stats[prefix + "mean_rel_diff_occluded"] = e.mean_rel_diff_occluded;
    res.stats[prefix + "mean_iou_berry"] = e.mean_iou_berry;
    res.stats[prefix + "mean_iou_merged"] = e.mean_iou_merged;
    res.stats[prefix + "mean_corr_non"] = e.mean_corr_non;
    res.stats[prefix + "mean_corr_occ"] = e.mean_corr_occ;
    res.stats[prefix + "mean_agreement_visible"] = e.mean_agreement_visible;
}

std::string comparison_row(const std::string& name, const EvalSummary& e) {
    return name + "," + fmt_g(e.r2_generated) + "," + fmt_g(e.r2_occluded) + "," +
           fmt_g(e.mean_rel_diff_generated) + "," + fmt_g(e.mean_corr_non) + "," +
           fmt_g(e.mean_corr_occ) + "," + fmt_g(e.mean_iou_berry) + "," +
           fmt_g(e.mean_agreement_visible) + "\n";
}

constexpr const char* kComparisonHeader =
    "model,r2_generated,r2_occluded,mean_rel_diff_generated,mean_corr_non,mean_corr_occ,"
    "mean_iou_berry,mean_agreement_visible\n";

// Correlation histogram for the occluded-domain comparison, 0.02-wide bins
// over [-1, 1].
void write_corr_histogram(const fs::path& dir, const std::string& split,
                          const std::vector<EvalRow>& rows) {
    const double width = 0.02;
    const int nbins = 100;  // [-1, 1]
    std::vector<std::int64_t> counts(nbins, 0);
    for (const EvalRow& r : rows) {
        if (!r.corr_occ) continue;
        int b = static_cast<int>(std::floor((*r.corr_occ + 1.0) / width));
        b = std::clamp(b, 0, nbins - 1);
        ++counts[b];
    }
    std::string csv = "bin_lo,bin_hi,count\n";
    std::vector<std::string> labels;
    HistogramSeries series{"corr(occluded, reoccluded generated)", kGenColor, {}};
    for (int b = 0; b < nbins; ++b) {
        double lo = -1.0 + b * width;
        csv += fmt_g(lo) + "," + fmt_g(lo + width) + "," + std::to_string(counts[b]) + "\n";
        labels.push_back(fmt_g(lo));
        series.heights.push_back(static_cast<double>(counts[b]));
    }
    write_text_file(dir / ("corr_occ_hist_" + split + ".csv"), csv);
    write_histogram_svg((dir / ("corr_occ_hist_" + split + ".svg")).string(),
                        "occluded-domain mask correlation", "Pearson correlation", labels,
                        {series});
}

// Accepted-berry size table plus a diameter histogram, reference vs generated.
void write_size_distributions(const PipelineSettings& s, const std::string& workdir,
                              const std::string& model_name, Split split) {
    fs::path manifest = pairs_manifest_path(workdir, split);
    std::vector<ManifestRecord> records = read_manifest(manifest.string());
    std::string csv = "id,source,area,diameter\n";
    std::vector<double> ref_d, gen_d;
    for (const ManifestRecord& rec : records) {
        PatchPair pair = pair_from_record(manifest.string(), rec);
        PatchPair crop = crop_pair_center(pair, s.train.crop_size);
        BerryMask gen =
            read_png_mask(generated_mask_path(workdir, model_name, split, rec.id).string());
        for (const BerryStat& st : berry_stats(crop.nonoccluded_mask, s.filters)) {
            csv += rec.id + ",reference," + std::to_string(st.area) + "," + fmt_g(st.diameter) +
                   "\n";
            ref_d.push_back(st.diameter);
        }
        for (const BerryStat& st : berry_stats(gen, s.filters)) {
            csv += rec.id + ",generated," + std::to_string(st.area) + "," + fmt_g(st.diameter) +
                   "\n";
            gen_d.push_back(st.diameter);
        }
    }
    fs::path dir = report_dir(workdir, model_name);
    write_text_file(dir / ("berry_sizes_" + split_name(split) + ".csv"), csv);

    double hi = 1.0;
    for (double d : ref_d) hi = std::max(hi, d);
    for (double d : gen_d) hi = std::max(hi, d);
    int nbins = static_cast<int>(std::ceil(hi / 2.0)) + 1;  // 2 px wide bins
    std::vector<std::string> labels;
    HistogramSeries ref_h{"reference", kOccColor, std::vector<double>(nbins, 0.0)};
    HistogramSeries gen_h{"generated", kGenColor, std::vector<double>(nbins, 0.0)};
    for (double d : ref_d) ref_h.heights[std::min(nbins - 1, static_cast<int>(d / 2.0))] += 1.0;
    for (double d : gen_d) gen_h.heights[std::min(nbins - 1, static_cast<int>(d / 2.0))] += 1.0;
    for (int b = 0; b < nbins; ++b) labels.push_back(fmt_g(b * 2.0));
    write_histogram_svg((dir / ("berry_sizes_" + split_name(split) + ".svg")).string(),
                        "accepted berry diameters", "diameter (px)", labels, {ref_h, gen_h});
}

}  // namespace

RecipeResult run_recipe(const std::string& name, const std::string& workdir,
                        const Config& overrides) {
    PipelineSettings s = PipelineSettings::from_config(overrides);
    s.validate();
    fs::create_directories(workdir);

    RecipeResult res;
    res.name = name;
    res.workdir = workdir;

    if (name == "exp1") {
        guard_config(workdir, s);
        prepare_dataset(s, workdir);
        std::string table = kComparisonHeader;
        for (InputMode mode : {InputMode::LA, InputMode::A}) {
            PipelineSettings sm = s;
            sm.train.input_mode = mode;
            std::string model = model_name_for(mode);
            EvalSummary e = run_model_chain(sm, workdir, model);
            add_summary_stats(res, model + ".", e);
            table += comparison_row(model, e);
        }
        write_text_file(fs::path(workdir) / "reports" / "exp1_comparison.csv", table);
    } else if (name == "exp2" || name == "exp3") {
        guard_config(workdir, s);
        prepare_dataset(s, workdir);
        std::string model = model_name_for(s.train.input_mode);
        EvalSummary e = run_model_chain(s, workdir, model);
        add_summary_stats(res, model + ".", e);
        if (name == "exp2") {
            EvalData data = compute_eval(s, workdir, model, Split::Test);
            write_corr_histogram(report_dir(workdir, model), split_name(Split::Test), data.rows);
        } else {
            labeled("report", [&] {
                write_size_distributions(s, workdir, model, Split::Test);
                return 0;
            });
        }
    } else if (name == "exp4") {
        std::string table = kComparisonHeader;
        for (SceneStyle style : {SceneStyle::Trained, SceneStyle::Dense}) {
            PipelineSettings st = s;
            st.scene.style = style;
            std::string sub = (fs::path(workdir) / style_name(style)).string();
            fs::create_directories(sub);
            guard_config(sub, st);
            prepare_dataset(st, sub);
            std::string model = model_name_for(st.train.input_mode);
            EvalSummary e = run_model_chain(st, sub, model);
            add_summary_stats(res, style_name(style) + ".", e);
            table += comparison_row(style_name(style), e);
        }
        write_text_file(fs::path(workdir) / "reports" / "exp4_comparison.csv", table);
    } else {
        throw std::invalid_argument("unknown recipe '" + name + "'");
    }

    write_recipe_stats((fs::path(workdir) / "reports" / (name + "_stats.csv")).string(), res);
    return res;
}

void write_recipe_stats(const std::string& path, const RecipeResult& result) {
    std::string csv = "metric,value\n";
    for (const auto& [k, v] : result.stats) csv += k + "," + fmt_g(v) + "\n";
    write_text_file(path, csv);
}

}  // namespace berrygan
