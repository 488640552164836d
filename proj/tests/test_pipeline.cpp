#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "rsnet/pipeline.hpp"
#include "rsnet/synth.hpp"

using namespace rsnet;

namespace {

LabeledCloud line_cloud(const std::vector<double>& xs, double y = 0.0) {
  LabeledCloud c;
  c.points = Matd::Zero(int(xs.size()), 3);
  for (size_t i = 0; i < xs.size(); ++i) {
    c.points(int(i), 0) = xs[i];
    c.points(int(i), 1) = y;
  }
  return c;
}

}  // namespace

TEST_CASE("split_cubes builds the stride grid", "[pipeline]") {
  BlockConfig cfg;
  cfg.block_size_xy = 1.0;

  SECTION("2.5m span at stride 1 gives origins 0, 1, 2") {
    auto cloud = line_cloud({0.0, 0.4, 1.2, 1.7, 2.2, 2.5});
    auto cubes = split_cubes(cloud, cfg, 1.0);
    REQUIRE(cubes.size() == 3);
    CHECK(cubes[0].x0 == 0.0);
    CHECK(cubes[1].x0 == 1.0);
    CHECK(cubes[2].x0 == 2.0);
    // the boundary point 2.5 lands in the last cube
    CHECK(std::find(cubes[2].indices.begin(), cubes[2].indices.end(), 5) != cubes[2].indices.end());
  }

  SECTION("half-bs stride on a 1m span gives two overlapping cubes") {
    auto cloud = line_cloud({0.0, 0.25, 0.6, 0.8, 1.0});
    auto cubes = split_cubes(cloud, cfg, 0.5);
    REQUIRE(cubes.size() == 2);
    CHECK(cubes[0].x0 == 0.0);
    CHECK(cubes[1].x0 == 0.5);
    // interior points of the overlap appear in both cubes
    for (int p : {2, 3}) {
      CHECK(std::count(cubes[0].indices.begin(), cubes[0].indices.end(), p) == 1);
      CHECK(std::count(cubes[1].indices.begin(), cubes[1].indices.end(), p) == 1);
    }
    // a point below the overlap appears once
    CHECK(std::count(cubes[1].indices.begin(), cubes[1].indices.end(), 1) == 0);
  }

  SECTION("degenerate scenes collapse to one cube") {
    auto cloud = line_cloud({0.3});
    auto cubes = split_cubes(cloud, cfg, 1.0);
    REQUIRE(cubes.size() == 1);
    CHECK(cubes[0].indices == std::vector<int>{0});
  }

  SECTION("z extent is unbounded") {
    LabeledCloud c;
    c.points.resize(2, 3);
    c.points << 0.5, 0.5, -40.0, 0.5, 0.5, 95.0;
    auto cubes = split_cubes(c, cfg, 1.0);
    REQUIRE(cubes.size() == 1);
    CHECK(cubes[0].indices.size() == 2);
  }
}

TEST_CASE("every point falls in at least one cube", "[pipeline]") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    SceneSpec spec;
    spec.x_span = rng.uniform(0.5, 5.0);
    spec.y_span = rng.uniform(0.5, 5.0);
    spec.surface_density = 30;
    spec.tables = 1;
    spec.chairs = 1;
    spec.clutter = 1;
    spec.seed = trial;
    auto cloud = generate_scene(spec);

    BlockConfig cfg;
    cfg.block_size_xy = rng.uniform(0.4, 1.5);
    for (double f : {0.2, 0.5, 1.0}) {
      auto cubes = split_cubes(cloud, cfg, f * cfg.block_size_xy);
      std::vector<int> covered(cloud.size(), 0);
      for (const auto& cube : cubes)
        for (int p : cube.indices) ++covered[p];
      for (int p = 0; p < cloud.size(); ++p) {
        INFO("trial " << trial << " stride factor " << f << " point " << p);
        REQUIRE(covered[p] >= 1);
      }
    }
  }
}

TEST_CASE("sample_fixed honors the with/without replacement rule", "[pipeline]") {
  auto cloud = line_cloud({0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  CubeIndexSet cube;
  cube.x0 = 0;
  cube.y0 = 0;
  for (int i = 0; i < 10; ++i) cube.indices.push_back(i);

  BlockConfig cfg;

  SECTION("cube of exactly ppc points is a permutation") {
    cfg.points_per_cube = 10;
    auto s = sample_fixed<double>(cube, cloud, cfg, 3);
    std::set<int> distinct(s.source_indices.begin(), s.source_indices.end());
    CHECK(distinct.size() == 10);
  }
  SECTION("small cube keeps every point once plus re-draws") {
    cfg.points_per_cube = 16;
    auto s = sample_fixed<double>(cube, cloud, cfg, 4);
    REQUIRE(s.source_indices.size() == 16);
    std::set<int> distinct(s.source_indices.begin(), s.source_indices.end());
    CHECK(distinct.size() == 10);  // all present, 6 duplicates
  }
  SECTION("large cube subsamples without replacement") {
    cfg.points_per_cube = 4;
    auto s = sample_fixed<double>(cube, cloud, cfg, 5);
    std::set<int> distinct(s.source_indices.begin(), s.source_indices.end());
    CHECK(distinct.size() == 4);
  }
  SECTION("deterministic in the seed") {
    cfg.points_per_cube = 6;
    auto a = sample_fixed<double>(cube, cloud, cfg, 9);
    auto b = sample_fixed<double>(cube, cloud, cfg, 9);
    auto c = sample_fixed<double>(cube, cloud, cfg, 10);
    CHECK(a.source_indices == b.source_indices);
    CHECK(a.source_indices != c.source_indices);
  }
  SECTION("empty cubes are rejected") {
    CubeIndexSet empty;
    CHECK_THROWS_AS(sample_fixed<double>(empty, cloud, cfg, 0), EmptyCubeError);
  }
}

TEST_CASE("sample_covering predicts every cube point", "[pipeline]") {
  Rng rng(77);
  LabeledCloud cloud;
  cloud.points.resize(100, 3);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 3; ++j) cloud.points(i, j) = rng.uniform();
  CubeIndexSet cube;
  for (int i = 0; i < 100; ++i) cube.indices.push_back(i);

  BlockConfig cfg;
  cfg.points_per_cube = 32;
  auto samples = sample_covering<double>(cube, cloud, cfg, 5);
  CHECK(samples.size() == 4);  // ceil(100/32)
  std::set<int> covered;
  for (const auto& s : samples) {
    CHECK(int(s.source_indices.size()) == 32);
    covered.insert(s.source_indices.begin(), s.source_indices.end());
  }
  CHECK(covered.size() == 100);
}

TEST_CASE("make_features constructs cube-local and normalized columns", "[pipeline]") {
  LabeledCloud cloud;
  cloud.points.resize(3, 6);
  cloud.points << 0, 0, 0, 0.2, 0.4, 0.6,   //
      5, 5, 5, 0.5, 0.5, 0.5,               //
      10, 10, 10, 0.9, 0.8, 0.7;

  BlockConfig cfg;
  cfg.block_size_xy = 20.0;
  cfg.points_per_cube = 3;
  auto cubes = split_cubes(cloud, cfg, 20.0);
  REQUIRE(cubes.size() == 1);
  auto sample = sample_fixed<double>(cubes[0], cloud, cfg, 1);

  SECTION("xyz3: offsets from the cube origin and min z") {
    auto f = make_features(sample, cloud, cfg);
    REQUIRE(f.cols() == 3);
    for (int i = 0; i < 3; ++i) {
      int src = sample.source_indices[i];
      CHECK(f(i, 0) == cloud.points(src, 0) - 0.0);
      CHECK(f(i, 2) == cloud.points(src, 2) - 0.0);
      if (src == 0) {
        CHECK(f(i, 0) == 0.0);
        CHECK(f(i, 1) == 0.0);
        CHECK(f(i, 2) == 0.0);
      }
    }
  }
  SECTION("full9: rgb passthrough and bounding-box normalization") {
    cfg.feature_mode = FeatureMode::Full9;
    auto f = make_features(sample, cloud, cfg);
    REQUIRE(f.cols() == 9);
    for (int i = 0; i < 3; ++i) {
      int src = sample.source_indices[i];
      for (int a = 0; a < 3; ++a) {
        CHECK(f(i, 3 + a) == cloud.points(src, 3 + a));
        CHECK(f(i, 6 + a) >= 0.0);
        CHECK(f(i, 6 + a) <= 1.0);
      }
      if (src == 1) {  // point at the box center
        CHECK(f(i, 6) == Catch::Approx(0.5));
        CHECK(f(i, 7) == Catch::Approx(0.5));
        CHECK(f(i, 8) == Catch::Approx(0.5));
      }
    }
  }
  SECTION("full9 demands rgb columns") {
    LabeledCloud bare;
    bare.points = Matd::Zero(2, 3);
    BlockConfig c9;
    c9.feature_mode = FeatureMode::Full9;
    c9.points_per_cube = 2;
    auto cs = split_cubes(bare, c9, 1.0);
    auto s = sample_fixed<double>(cs[0], bare, c9, 0);
    CHECK_THROWS_AS(make_features(s, bare, c9), ConfigError);
  }
}

TEST_CASE("majority voting", "[pipeline]") {
  SECTION("plurality wins") {
    MergeAccumulator acc(1, 3);
    acc.add_vote(0, 2);
    acc.add_vote(0, 2);
    acc.add_vote(0, 1);
    CHECK(merge_votes(acc) == std::vector<int>{2});
  }
  SECTION("ties break toward the smallest class index") {
    MergeAccumulator acc(1, 2);
    acc.add_vote(0, 0);
    acc.add_vote(0, 1);
    CHECK(merge_votes(acc) == std::vector<int>{0});
  }
  SECTION("a single vote decides") {
    MergeAccumulator acc(1, 4);
    acc.add_vote(0, 3);
    CHECK(merge_votes(acc) == std::vector<int>{3});
  }
  SECTION("zero-vote points raise CoverageError") {
    MergeAccumulator acc(2, 2);
    acc.add_vote(0, 0);
    CHECK_THROWS_AS(merge_votes(acc), CoverageError);
  }
  SECTION("ground-truth votes from every cube give accuracy 1") {
    SceneSpec spec;
    spec.seed = 2;
    spec.surface_density = 40;
    auto cloud = generate_scene(spec);
    BlockConfig cfg;
    auto cubes = split_cubes(cloud, cfg, 0.5);  // overlapping
    MergeAccumulator acc(cloud.size(), cloud.num_classes);
    for (const auto& cube : cubes)
      for (int p : cube.indices) acc.add_vote(p, cloud.labels[p]);
    auto merged = merge_votes(acc);
    CHECK(merged == cloud.labels);
  }
}
