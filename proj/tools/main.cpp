#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "berrygan/config.hpp"
#include "berrygan/gan.hpp"
#include "berrygan/helmert.hpp"
#include "berrygan/manifest.hpp"
#include "berrygan/pipeline.hpp"
#include "berrygan/png_io.hpp"

namespace {

using namespace berrygan;

std::vector<Split> parse_splits(const std::string& s) {
    if (s == "train") return {Split::Train};
    if (s == "test") return {Split::Test};
    if (s == "both") return {Split::Train, Split::Test};
    throw std::invalid_argument("split must be train, test or both");
}

std::string default_model_name(const PipelineSettings& s) {
    return s.train.input_mode == InputMode::LA ? "la" : "a";
}

std::vector<KeypointPair> read_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open keypoint file " + path);
    std::vector<KeypointPair> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = line.substr(0, line.find('#'));
        if (trimmed.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(trimmed);
        KeypointPair kp;
        if (!(ls >> kp.sx >> kp.sy >> kp.tx >> kp.ty))
            throw std::invalid_argument("keypoint file " + path + " line " +
                                        std::to_string(lineno) + ": expected 'sx sy tx ty'");
        out.push_back(kp);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"berry revelation pipeline: synthesize, train, reveal, count"};
    app.require_subcommand(1);
    app.fallthrough();  // let -w/-c/-s appear after the subcommand too

    std::string workdir = "work";
    if (const char* env = std::getenv("BERRYGAN_WORKDIR")) workdir = env;
    app.add_option("-w,--workdir", workdir, "working directory (or env BERRYGAN_WORKDIR)")
        ->capture_default_str();
    std::string config_path;
    app.add_option("-c,--config", config_path, "config file with key = value lines");
    std::vector<std::string> overrides;
    app.add_option("-s,--set", overrides, "single config override key=value, repeatable");

    auto load_config = [&]() {
        Config cfg;
        try {
            if (!config_path.empty()) cfg = Config::from_file(config_path);
        } catch (const std::exception& e) {
            throw std::invalid_argument(e.what());
        }
        for (const std::string& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            auto strip = [](std::string v) {
                auto b = v.find_first_not_of(" \t");
                auto e = v.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
            };
            cfg.set(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
        }
        return cfg;
    };
    auto load_settings = [&]() {
        PipelineSettings s = PipelineSettings::from_config(load_config());
        s.validate();
        return s;
    };

    std::function<int()> action;

    // dataset stages
    std::string gen_split = "both";
    CLI::App* gen = app.add_subcommand("gen-scenes", "synthesize scene patches and masks");
    gen->add_option("--split", gen_split, "train, test or both")->capture_default_str();
    gen->callback([&] {
        action = [&]() {
            PipelineSettings s = load_settings();
            guard_config(workdir, s);
            for (Split split : parse_splits(gen_split)) stage_gen_scenes(s, workdir, split);
            return 0;
        };
    });

    std::string aug_split = "both";
    CLI::App* aug = app.add_subcommand("augment", "occlude scenes with leaves into patch pairs");
    aug->add_option("--split", aug_split, "train, test or both")->capture_default_str();
    aug->callback([&] {
        action = [&]() {
            PipelineSettings s = load_settings();
            guard_config(workdir, s);
            for (Split split : parse_splits(aug_split)) stage_augment(s, workdir, split);
            return 0;
        };
    });

    // alignment utilities
    std::string kp_path, align_image, align_image_out, align_mask, align_mask_out;
    CLI::App* align = app.add_subcommand("align", "estimate a similarity transform and warp");
    align->add_option("--keypoints", kp_path, "file with 'sx sy tx ty' lines")->required();
    align->add_option("--image", align_image, "grayscale image to warp into the target frame");
    align->add_option("--image-out", align_image_out, "output path for the warped image");
    align->add_option("--mask", align_mask, "mask to warp (nearest neighbor)");
    align->add_option("--mask-out", align_mask_out, "output path for the warped mask");
    align->callback([&] {
        action = [&]() {
            HelmertFit fit = estimate_helmert(read_keypoints(kp_path));
            std::printf("tx %.12g\nty %.12g\nscale %.12g\ntheta_rad %.12g\nrms_x %.12g\nrms_y %.12g\n",
                        fit.params.tx, fit.params.ty, fit.params.s, fit.params.theta, fit.rms_x,
                        fit.rms_y);
            if (!align_image.empty()) {
                if (align_image_out.empty())
                    throw std::invalid_argument("--image needs --image-out");
                write_png_gray(align_image_out,
                               apply_helmert(fit.params, read_png_gray(align_image)));
            }
            if (!align_mask.empty()) {
                if (align_mask_out.empty()) throw std::invalid_argument("--mask needs --mask-out");
                write_png_gray(align_mask_out,
                               apply_helmert(fit.params, read_png_mask(align_mask)));
            }
            return 0;
        };
    });

    std::string ex_image, ex_mask, ex_out;
    int ex_resize = 0;
    CLI::App* extract = app.add_subcommand("extract", "cut aligned images into training patches");
    extract->add_option("--image", ex_image, "grayscale source image")->required();
    extract->add_option("--mask", ex_mask, "matching mask")->required();
    extract->add_option("--out", ex_out, "output directory")->required();
    extract->add_option("--resize", ex_resize, "resize patches to this edge length, 0 = keep")
        ->capture_default_str();
    extract->callback([&] {
        action = [&]() {
            PipelineSettings s = load_settings();
            auto patches = extract_patches(read_png_gray(ex_image), read_png_mask(ex_mask),
                                           s.align_window, s.align_stride);
            std::filesystem::create_directories(ex_out);
            std::string lines;
            for (std::size_t i = 0; i < patches.size(); ++i) {
                ExtractedPatch& p = patches[i];
                if (ex_resize > 0) {
                    p.image = resize_nearest(p.image, ex_resize);
                    p.mask = resize_nearest(p.mask, ex_resize);
                }
                char id[16];
                std::snprintf(id, sizeof id, "x%04zu", i);
                std::string image_rel = std::string(id) + "_image.png";
                std::string mask_rel = std::string(id) + "_mask.png";
                write_png_gray(ex_out + "/" + image_rel, p.image);
                write_png_gray(ex_out + "/" + mask_rel, p.mask);
                lines += std::string(id) + "," + std::to_string(p.origin_x) + "," +
                         std::to_string(p.origin_y) + "," + image_rel + "," + mask_rel + "\n";
            }
            std::ofstream listing(ex_out + "/patches.csv", std::ios::trunc | std::ios::binary);
            listing << "id,origin_x,origin_y,image,mask\n" << lines;
            std::printf("%zu patches\n", patches.size());
            return 0;
        };
    });

    // model stages
    std::string model_name;
    CLI::App* train_cmd = app.add_subcommand("train", "train the conditional GAN");
    train_cmd->add_option("--model", model_name, "model name, defaults to the input mode");
    train_cmd->callback([&] {
        action = [&]() {
            PipelineSettings s = load_settings();
            guard_config(workdir, s);
            std::string name = model_name.empty() ? default_model_name(s) : model_name;
            std::string path = stage_train(s, workdir, name);
            std::printf("%s\n", path.c_str());
            return 0;
        };
    });

    struct ModelStage {
        const char* verb;
        const char* help;
        std::function<void(const PipelineSettings&, const std::string&, const std::string&, Split)> run;
    };
    const std::vector<ModelStage> stages = {
        {"infer", "generate masks (and images in LA mode) for a split",
         [](const PipelineSettings& s, const std::string& wd, const std::string& m, Split sp) {
             stage_infer(s, wd, m, sp);
         }},
        {"count", "count berries in reference, occluded and generated masks",
         [](const PipelineSettings& s, const std::string& wd, const std::string& m, Split sp) {
             stage_count(s, wd, m, sp);
         }},
        {"evaluate", "per-patch metrics, histograms and generation maps",
         [](const PipelineSettings& s, const std::string& wd, const std::string& m, Split sp) {
             EvalSummary e = stage_evaluate(s, wd, m, sp);
             std::printf("patches %d\nr2_generated %.6g\nr2_occluded %.6g\nmean_corr_non %.6g\n",
                         e.patches, e.r2_generated, e.r2_occluded, e.mean_corr_non);
         }},
        {"report", "scatter and histogram plots from the evaluation",
         [](const PipelineSettings& s, const std::string& wd, const std::string& m, Split sp) {
             stage_report(s, wd, m, sp);
         }},
    };
    std::vector<std::string> stage_model(stages.size());
    std::vector<std::string> stage_split(stages.size(), "test");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        CLI::App* sub = app.add_subcommand(stages[i].verb, stages[i].help);
        sub->add_option("--model", stage_model[i], "model name, defaults to the input mode");
        sub->add_option("--split", stage_split[i], "train or test")->capture_default_str();
        sub->callback([&, i] {
            action = [&, i]() {
                PipelineSettings s = load_settings();
                guard_config(workdir, s);
                std::string name = stage_model[i].empty() ? default_model_name(s) : stage_model[i];
                for (Split split : parse_splits(stage_split[i])) {
                    stages[i].run(s, workdir, name, split);
                }
                return 0;
            };
        });
    }

    std::string recipe;
    CLI::App* run = app.add_subcommand("run", "run a full experiment recipe");
    run->add_option("recipe", recipe, "exp1, exp2, exp3 or exp4")->required();
    run->callback([&] {
        action = [&]() {
            RecipeResult res = run_recipe(recipe, workdir, load_config());
            std::printf("%s finished in %s\n", res.name.c_str(), res.workdir.c_str());
            for (const auto& [k, v] : res.stats) std::printf("%s %.6g\n", k.c_str(), v);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return action();
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
