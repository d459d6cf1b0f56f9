#include <doctest.h>

#include "berrygan/config.hpp"
#include "berrygan/pipeline.hpp"

using namespace berrygan;

TEST_SUITE("config") {

TEST_CASE("key value text parses with comments and defaults") {
    Config c = Config::from_string(
        "# a comment\n"
        "seed = 7\n"
        "  lr=0.001  # trailing note\n"
        "\n"
        "style = dense\n"
        "patch_filter = false\n");
    CHECK(c.get_u64("seed", 1) == 7);
    CHECK(c.get_double("lr", 0.0) == doctest::Approx(0.001));
    CHECK(c.get_string("style", "trained") == "dense");
    CHECK_FALSE(c.get_bool("patch_filter", true));
    CHECK(c.get_int("missing", 42) == 42);
    CHECK(c.has("seed"));
    CHECK_FALSE(c.has("missing"));
}

TEST_CASE("broken lines and files are rejected") {
    CHECK_THROWS_AS(Config::from_string("just a bare word\n"), std::runtime_error);
    CHECK_THROWS_AS(Config::from_file("no/such/file.cfg"), std::runtime_error);
    Config c = Config::from_string("x = notanumber\n");
    CHECK_THROWS_AS(c.get_int("x", 0), std::runtime_error);
    CHECK_THROWS_AS(c.get_bool("x", false), std::runtime_error);
}

TEST_CASE("merging overlays the other config") {
    Config base = Config::from_string("a = 1\nb = 2\n");
    Config over = Config::from_string("b = 3\nc = 4\n");
    Config merged = base.merged_with(over);
    CHECK(merged.get_int("a", 0) == 1);
    CHECK(merged.get_int("b", 0) == 3);
    CHECK(merged.get_int("c", 0) == 4);
}

TEST_CASE("the shipped defaults file reproduces the built-in settings exactly") {
    Config file = Config::from_file(std::string(BERRYGAN_SOURCE_DIR) + "/configs/defaults.cfg");
    PipelineSettings from_file = PipelineSettings::from_config(file);
    from_file.validate();
    Config a = from_file.to_config();
    Config b = PipelineSettings::desk_defaults().to_config();
    CHECK(a.entries() == b.entries());
}

TEST_CASE("unknown settings are called out by name") {
    Config c = Config::from_string("not_a_setting = 1\n");
    try {
        PipelineSettings::from_config(c);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("not_a_setting") != std::string::npos);
    }
}

TEST_CASE("pipeline settings validation catches inconsistent setups") {
    PipelineSettings s = PipelineSettings::desk_defaults();
    s.validate();

    PipelineSettings bad = s;
    bad.leaf_train_count = bad.leaf_count;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = s;
    bad.train.crop_size = bad.scene.patch_size + 8;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = s;
    bad.train_scenes = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("the full-scale profile swaps every scale knob at once") {
    Config c = Config::from_string("full_scale = true\n");
    PipelineSettings s = PipelineSettings::from_config(c);
    CHECK(s.full_scale);
    CHECK(s.scene.patch_size == 286);
    CHECK(s.train.crop_size == 256);
    CHECK(s.train.base_channels == 64);
    CHECK(s.train.depth == 8);
    CHECK(s.train.disc_layers == 3);
    CHECK(s.train.epochs == 600);
    CHECK(s.resize_target == 286);
    s.validate();

    // explicit overrides still win over the profile
    Config c2 = Config::from_string("full_scale = true\nepochs = 10\n");
    CHECK(PipelineSettings::from_config(c2).train.epochs == 10);
}

TEST_CASE("settings survive the config round trip") {
    PipelineSettings s = PipelineSettings::desk_defaults();
    s.seed = 99;
    s.train_scenes = 17;
    s.train.lambda_l1 = 55.0;
    s.scene.style = SceneStyle::Dense;
    PipelineSettings back = PipelineSettings::from_config(s.to_config());
    CHECK(back.seed == 99);
    CHECK(back.train_scenes == 17);
    CHECK(back.train.lambda_l1 == doctest::Approx(55.0));
    CHECK(back.scene.style == SceneStyle::Dense);
    CHECK(back.to_config().entries() == s.to_config().entries());
}

}  // TEST_SUITE
