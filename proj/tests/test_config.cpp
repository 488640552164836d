#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rsnet/config.hpp"

using namespace rsnet;

TEST_CASE("defaults match the baseline setting", "[config]") {
  RunConfig cfg;
  CHECK(cfg.r_x == 0.02);
  CHECK(cfg.r_y == 0.02);
  CHECK(cfg.r_z == 0.02);
  CHECK(cfg.block_size == 1.0);
  CHECK(cfg.test_stride == 1.0);  // non-overlapping cubes
  CHECK(cfg.rnn_unit == "gru");
  CHECK(cfg.points_per_cube == 4096);
  CHECK(cfg.input_channels == std::vector<int>{64, 64, 64});
  CHECK(cfg.rnn_channels == std::vector<int>{256, 128, 64, 64, 128, 256});
  CHECK(cfg.output_channels == std::vector<int>{512, 256});
}

TEST_CASE("config files parse with comments and whitespace", "[config]") {
  auto path = (std::filesystem::temp_directory_path() / "rsnet_cfg_test.cfg").string();
  {
    std::ofstream out(path);
    out << "# a comment\n"
        << "r_z = 0.05\n"
        << "\n"
        << "rnn_unit = lstm\n"
        << "  points_per_cube =  512 \n"
        << "rnn_channels = 16,8,16\n"
        << "resample_each_epoch = false\n";
  }
  auto cfg = RunConfig::from_file(path);
  CHECK(cfg.r_z == 0.05);
  CHECK(cfg.rnn_unit == "lstm");
  CHECK(cfg.points_per_cube == 512);
  CHECK(cfg.rnn_channels == std::vector<int>{16, 8, 16});
  CHECK_FALSE(cfg.resample_each_epoch);
  CHECK(cfg.r_x == 0.02);  // untouched default
}

TEST_CASE("unknown keys and bad values are rejected", "[config]") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("r_z", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("epochs", "3.5"), ConfigError);
  CHECK_THROWS_AS(cfg.set("rnn_unit", "transformer"), ConfigError);
  CHECK_THROWS_AS(cfg.set("feature_mode", "xyz4"), ConfigError);
  CHECK_THROWS_AS(cfg.set("precision", "f16"), ConfigError);
  CHECK_THROWS_AS(cfg.set("resample_each_epoch", "maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_overrides({"r_z"}), ConfigError);  // missing '='
}

TEST_CASE("overrides mirror --set flags", "[config]") {
  RunConfig cfg;
  cfg.apply_overrides({"r_z=0.08", "rnn_unit=vanilla", "seed=99"});
  CHECK(cfg.r_z == 0.08);
  CHECK(cfg.rnn_unit == "vanilla");
  CHECK(cfg.seed == 99);
}

TEST_CASE("serialize/parse roundtrip preserves every field", "[config]") {
  RunConfig cfg;
  cfg.r_z = 0.037;
  cfg.rnn_unit = "lstm";
  cfg.rnn_channels = {32, 16, 32};
  cfg.learning_rate = 2.5e-4;
  cfg.seed = 1234567;
  cfg.train_data = "/tmp/scenes";
  cfg.class_names = {"a", "b", "c"};
  cfg.synth_pair_fraction = 0.25;
  cfg.resample_each_epoch = false;

  auto back = RunConfig::from_text(cfg.serialize());
  CHECK(back.serialize() == cfg.serialize());
  CHECK(back.r_z == cfg.r_z);
  CHECK(back.rnn_channels == cfg.rnn_channels);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.class_names == cfg.class_names);
  CHECK(back.resample_each_epoch == cfg.resample_each_epoch);
}

TEST_CASE("derived configs", "[config]") {
  RunConfig cfg;
  SECTION("feature mode determines input width") {
    cfg.feature_mode = "xyz3";
    CHECK(cfg.model_config().d_in == 3);
    cfg.feature_mode = "full9";
    CHECK(cfg.model_config().d_in == 9);
  }
  SECTION("rnn unit maps through") {
    cfg.rnn_unit = "lstm";
    CHECK(cfg.model_config().rnn.variant == CellVariant::Lstm);
  }
  SECTION("scene spec carries the synth keys") {
    cfg.synth_mode = "context";
    cfg.synth_cells_x = 5;
    cfg.seed = 3;
    auto spec = cfg.scene_spec();
    CHECK(spec.mode == SceneMode::ContextTask);
    CHECK(spec.cells_x == 5);
    CHECK(spec.seed == 3);
  }
  SECTION("invalid derived configs throw") {
    cfg.num_classes = 1;
    CHECK_THROWS_AS(cfg.model_config(), ConfigError);
    RunConfig c2;
    c2.synth_mode = "nope";
    CHECK_THROWS_AS(c2.scene_spec(), ConfigError);
  }
}
