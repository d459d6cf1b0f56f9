#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "berrygan/pipeline.hpp"

using namespace berrygan;
namespace fs = std::filesystem;

namespace {

Config tiny_overrides() {
    Config c;
    c.set("train_scenes", "4");
    c.set("test_scenes", "2");
    c.set("pairs_per_scene_train", "2");
    c.set("pairs_per_scene_test", "1");
    c.set("epochs", "2");
    c.set("map_limit", "2");
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::map<fs::path, std::string> snapshot_text_outputs(const fs::path& root) {
    std::map<fs::path, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension();
        if (ext == ".csv" || ext == ".jsonl" || ext == ".svg")
            out[fs::relative(entry.path(), root)] = slurp(entry.path());
    }
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("scene seeds never collide across splits") {
    for (int i = 0; i < 2000; ++i)
        CHECK(scene_seed_for(Split::Train, i) != scene_seed_for(Split::Test, i));
    CHECK(scene_seed_for(Split::Train, 0) != scene_seed_for(Split::Train, 1));
}

TEST_CASE("pair building honors an exact target") {
    PipelineSettings s = PipelineSettings::desk_defaults();
    auto pairs = build_pairs(s, Split::Train, 0, 9, 7);
    CHECK(pairs.size() == 7);
    auto more = build_pairs(s, Split::Test, 3, 3, 0);
    CHECK(more.size() <= 9);  // 3 scenes x 3, minus any filtered pairs
    CHECK(!more.empty());
}

TEST_CASE("a small two-mode experiment produces its full artifact bundle") {
    TempDir tmp("scratch_exp1");
    RecipeResult res = run_recipe("exp1", tmp.path.string(), tiny_overrides());
    CHECK(res.name == "exp1");

    for (const char* rel :
         {"scenes/train.jsonl", "scenes/test.jsonl", "pairs/train.jsonl", "pairs/test.jsonl",
          "models/la.ckpt", "models/la_loss.csv", "models/a.ckpt", "models/a_loss.csv",
          "reports/la/counts_test.csv", "reports/la/eval_test.csv", "reports/la/summary_test.csv",
          "reports/la/rel_diff_test.csv", "reports/la/scatter_test.svg",
          "reports/a/counts_test.csv", "reports/exp1_comparison.csv", "reports/exp1_stats.csv",
          "config.cfg"})
        CHECK_MESSAGE(fs::exists(tmp.path / rel), rel);

    CHECK(res.stats.count("la.patches") == 1);
    CHECK(res.stats.count("a.patches") == 1);
    CHECK(res.stats.count("la.r2_generated") == 1);
    int patches = static_cast<int>(res.stats.at("la.patches"));
    CHECK(patches >= 1);
    CHECK(patches <= 2);  // two test scenes, one pair each, minus filtered ones

    // generation maps are capped by map_limit, two renderings per patch
    int maps = 0;
    for (const auto& entry : fs::directory_iterator(tmp.path / "reports/la/maps")) {
        (void)entry;
        ++maps;
    }
    CHECK(maps == 2 * std::min(2, patches));
}

TEST_CASE("rerunning a finished recipe is idempotent and byte stable") {
    TempDir tmp("scratch_rerun");
    run_recipe("exp2", tmp.path.string(), tiny_overrides());
    auto first = snapshot_text_outputs(tmp.path);
    REQUIRE(!first.empty());

    auto ckpt_time = fs::last_write_time(tmp.path / "models/la.ckpt");
    run_recipe("exp2", tmp.path.string(), tiny_overrides());
    auto second = snapshot_text_outputs(tmp.path);

    CHECK(first == second);
    // the checkpoint was detected, not retrained
    CHECK(fs::last_write_time(tmp.path / "models/la.ckpt") == ckpt_time);
}

TEST_CASE("a used workdir rejects different settings") {
    TempDir tmp("scratch_guard");
    run_recipe("exp2", tmp.path.string(), tiny_overrides());
    Config changed = tiny_overrides();
    changed.set("epochs", "4");
    CHECK_THROWS_AS(run_recipe("exp2", tmp.path.string(), changed), std::runtime_error);
}

TEST_CASE("unknown recipes are a configuration error") {
    TempDir tmp("scratch_unknown");
    CHECK_THROWS_AS(run_recipe("exp9", tmp.path.string(), tiny_overrides()),
                    std::invalid_argument);
}

TEST_CASE("stage failures name the stage") {
    TempDir tmp("scratch_stagename");
    PipelineSettings s = PipelineSettings::from_config(tiny_overrides());
    try {
        stage_infer(s, tmp.path.string(), "la", Split::Test);
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("infer") != std::string::npos);
    }
}

TEST_CASE("the correlation study bundle adds its histogram") {
    TempDir tmp("scratch_exp2");
    RecipeResult res = run_recipe("exp2", tmp.path.string(), tiny_overrides());
    CHECK(fs::exists(tmp.path / "reports/la/corr_occ_hist_test.csv"));
    CHECK(fs::exists(tmp.path / "reports/la/corr_occ_hist_test.svg"));
    CHECK(res.stats.count("la.mean_corr_occ") == 1);
}

TEST_CASE("the size study bundle adds berry size distributions") {
    TempDir tmp("scratch_exp3");
    run_recipe("exp3", tmp.path.string(), tiny_overrides());
    CHECK(fs::exists(tmp.path / "reports/la/berry_sizes_test.csv"));
    std::string csv = slurp(tmp.path / "reports/la/berry_sizes_test.csv");
    CHECK(csv.find("id,source,area,diameter") == 0);
}

TEST_CASE("the style comparison runs both layouts in their own workdirs") {
    TempDir tmp("scratch_exp4");
    RecipeResult res = run_recipe("exp4", tmp.path.string(), tiny_overrides());
    CHECK(fs::exists(tmp.path / "trained/models/la.ckpt"));
    CHECK(fs::exists(tmp.path / "dense/models/la.ckpt"));
    CHECK(fs::exists(tmp.path / "reports/exp4_comparison.csv"));
    CHECK(res.stats.count("trained.r2_generated") == 1);
    CHECK(res.stats.count("dense.r2_generated") == 1);
}

TEST_CASE("manifests loaded from disk rebuild the exact in-memory pairs") {
    TempDir tmp("scratch_roundtrip");
    PipelineSettings s = PipelineSettings::from_config(tiny_overrides());
    stage_gen_scenes(s, tmp.path.string(), Split::Test);
    stage_augment(s, tmp.path.string(), Split::Test);

    auto from_disk = load_pairs((tmp.path / "pairs/test.jsonl").string());
    auto rebuilt = build_pairs(s, Split::Test, s.test_scenes, s.pairs_per_scene_test, 0);
    REQUIRE(from_disk.size() == rebuilt.size());
    for (std::size_t i = 0; i < from_disk.size(); ++i) {
        CHECK(from_disk[i].occluded_image == rebuilt[i].occluded_image);
        CHECK(from_disk[i].occluded_mask == rebuilt[i].occluded_mask);
        CHECK(from_disk[i].nonoccluded_image == rebuilt[i].nonoccluded_image);
        CHECK(from_disk[i].nonoccluded_mask == rebuilt[i].nonoccluded_mask);
        CHECK(from_disk[i].leaf_footprint == rebuilt[i].leaf_footprint);
    }
}

}  // TEST_SUITE

TEST_SUITE("cli") {

#ifdef BERRYGAN_CLI_PATH

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(BERRYGAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("exit codes separate config, data and usage failures") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("definitely-not-a-command") != 0);
    CHECK(run_cli("-s nonsense_key=1 run exp1") == 2);          // unknown setting
    CHECK(run_cli("run exp9 -w scratch_cli_none") == 2);        // unknown recipe
    CHECK(run_cli("-s epochs=3 run exp1 -w scratch_cli_none") == 2);  // invalid value
    CHECK(run_cli("count --model ghost -w scratch_cli_none") == 3);   // missing data
    std::filesystem::remove_all("scratch_cli_none");
}

TEST_CASE("the workdir environment variable is honored") {
    std::filesystem::remove_all("scratch_cli_env");
    std::string cmd = std::string("BERRYGAN_WORKDIR=scratch_cli_env ") + BERRYGAN_CLI_PATH +
                      " -s train_scenes=2 -s test_scenes=1 gen-scenes --split test"
                      " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    CHECK(std::filesystem::exists("scratch_cli_env/scenes/test.jsonl"));
    std::filesystem::remove_all("scratch_cli_env");
}

TEST_CASE("stage commands refuse a workdir built with other settings") {
    std::filesystem::remove_all("scratch_cli_guard");
    CHECK(run_cli("-s train_scenes=2 -s test_scenes=1 gen-scenes --split test"
                  " -w scratch_cli_guard") == 0);
    CHECK(std::filesystem::exists("scratch_cli_guard/config.cfg"));
    // same settings pass, a changed knob is rejected before any stage runs
    CHECK(run_cli("-s train_scenes=2 -s test_scenes=1 gen-scenes --split test"
                  " -w scratch_cli_guard") == 0);
    CHECK(run_cli("-s train_scenes=3 -s test_scenes=1 gen-scenes --split test"
                  " -w scratch_cli_guard") == 3);
    std::filesystem::remove_all("scratch_cli_guard");
}

TEST_CASE("keypoint alignment runs end to end from a file") {
    std::filesystem::create_directories("scratch_cli_align");
    {
        std::ofstream kp("scratch_cli_align/kp.txt");
        kp << "# sx sy tx ty\n";
        kp << "0 0  5 -3\n";
        kp << "10 0  5 17\n";
        kp << "0 10  -15 -3\n";
        kp << "10 10  -15 17\n";  // pure rotation by 90 degrees, scale 2, shift
    }
    std::string cmd = std::string(BERRYGAN_CLI_PATH) +
                      " align --keypoints scratch_cli_align/kp.txt"
                      " > scratch_cli_align/out.txt 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    std::ifstream out("scratch_cli_align/out.txt");
    std::string text((std::istreambuf_iterator<char>(out)), {});
    CHECK(text.find("scale") != std::string::npos);
    CHECK(text.find("theta") != std::string::npos);
    std::filesystem::remove_all("scratch_cli_align");
}

#endif

}  // TEST_SUITE
