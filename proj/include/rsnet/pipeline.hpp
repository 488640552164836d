#pragma once

#include <vector>

#include "rsnet/cloud.hpp"
#include "rsnet/common.hpp"

namespace rsnet {

enum class FeatureMode { Xyz3, Full9 };

struct BlockConfig {
  double block_size_xy = 1.0;  // bs, meters
  double train_stride = 1.0;
  double test_stride = 1.0;    // bs by default: non-overlapping cubes
  int points_per_cube = 4096;
  FeatureMode feature_mode = FeatureMode::Xyz3;
  bool resample_each_epoch = true;

  int d_in() const { return feature_mode == FeatureMode::Full9 ? 9 : 3; }

  void validate() const {
    if (block_size_xy <= 0) throw ConfigError("block_size_xy must be positive");
    if (train_stride <= 0 || test_stride <= 0) throw ConfigError("strides must be positive");
    if (points_per_cube < 1) throw ConfigError("points_per_cube must be >= 1");
  }
};

struct CubeIndexSet {
  double x0 = 0, y0 = 0;
  std::vector<int> indices;
};

// Sliding-window decomposition on the xy plane only; cubes are unbounded in
// z. Origins form the grid {min + i*stride}; the topmost cube along each
// axis is right-closed so boundary points are always covered (stride <= bs).
inline std::vector<CubeIndexSet> split_cubes(const LabeledCloud& cloud, const BlockConfig& cfg,
                                             double stride) {
  cfg.validate();
  if (stride <= 0) throw ConfigError("stride must be positive");
  const int n = cloud.size();
  const double bs = cfg.block_size_xy;

  double xmin = cloud.points.col(0).minCoeff(), xmax = cloud.points.col(0).maxCoeff();
  double ymin = cloud.points.col(1).minCoeff(), ymax = cloud.points.col(1).maxCoeff();
  int nx = std::max(1, int(std::ceil((xmax - xmin) / stride)));
  int ny = std::max(1, int(std::ceil((ymax - ymin) / stride)));

  std::vector<CubeIndexSet> cubes;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      CubeIndexSet cube;
      cube.x0 = xmin + i * stride;
      cube.y0 = ymin + j * stride;
      bool last_x = (i == nx - 1), last_y = (j == ny - 1);
      for (int p = 0; p < n; ++p) {
        double x = cloud.points(p, 0), y = cloud.points(p, 1);
        bool in_x = x >= cube.x0 && (x < cube.x0 + bs || (last_x && x <= cube.x0 + bs));
        bool in_y = y >= cube.y0 && (y < cube.y0 + bs || (last_y && y <= cube.y0 + bs));
        if (in_x && in_y) cube.indices.push_back(p);
      }
      if (!cube.indices.empty()) cubes.push_back(std::move(cube));
    }
  }
  return cubes;
}

template <typename T>
struct CubeSample {
  Mat<T> features;                  // points_per_cube x d_in, filled by make_features
  Matd coords;                      // points_per_cube x 3, raw scene xyz
  std::vector<int> source_indices;  // into the parent scene
  double x0 = 0, y0 = 0;
};

// Fixed-count sampling: without replacement when the cube is large enough;
// otherwise every point once plus uniform re-draws, so each cube point is
// guaranteed at least one prediction.
template <typename T>
CubeSample<T> sample_fixed(const CubeIndexSet& cube, const LabeledCloud& cloud,
                           const BlockConfig& cfg, uint64_t seed) {
  if (cube.indices.empty()) throw EmptyCubeError("cannot sample an empty cube");
  const int m = int(cube.indices.size());
  const int ppc = cfg.points_per_cube;
  Rng rng(seed);

  CubeSample<T> s;
  s.x0 = cube.x0;
  s.y0 = cube.y0;
  s.source_indices.reserve(ppc);
  if (m >= ppc) {
    std::vector<int> pool = cube.indices;
    for (int i = 0; i < ppc; ++i) {
      size_t j = i + rng.below(size_t(m - i));
      std::swap(pool[i], pool[j]);
      s.source_indices.push_back(pool[i]);
    }
  } else {
    s.source_indices = cube.indices;
    for (int i = m; i < ppc; ++i) s.source_indices.push_back(cube.indices[rng.below(m)]);
  }

  s.coords.resize(ppc, 3);
  for (int i = 0; i < ppc; ++i) s.coords.row(i) = cloud.points.row(s.source_indices[i]).head(3);
  return s;
}

// Test-time sampling: a shuffled partition of the cube into ceil(m/ppc)
// fixed-count samples (last one padded by re-draws), so every cube point
// receives at least one prediction regardless of cube size.
template <typename T>
std::vector<CubeSample<T>> sample_covering(const CubeIndexSet& cube, const LabeledCloud& cloud,
                                           const BlockConfig& cfg, uint64_t seed) {
  if (cube.indices.empty()) throw EmptyCubeError("cannot sample an empty cube");
  const int m = int(cube.indices.size());
  const int ppc = cfg.points_per_cube;
  if (m <= ppc) return {sample_fixed<T>(cube, cloud, cfg, seed)};

  Rng rng(seed);
  std::vector<int> pool = cube.indices;
  rng.shuffle(pool.begin(), pool.end());

  std::vector<CubeSample<T>> out;
  for (int start = 0; start < m; start += ppc) {
    CubeSample<T> s;
    s.x0 = cube.x0;
    s.y0 = cube.y0;
    s.source_indices.assign(pool.begin() + start, pool.begin() + std::min(start + ppc, m));
    while (int(s.source_indices.size()) < ppc)
      s.source_indices.push_back(cube.indices[rng.below(m)]);
    s.coords.resize(ppc, 3);
    for (int i = 0; i < ppc; ++i) s.coords.row(i) = cloud.points.row(s.source_indices[i]).head(3);
    out.push_back(std::move(s));
  }
  return out;
}

// XYZ3: cube-local xyz. FULL9: cube-local xyz, RGB, then xyz normalized to
// [0,1] by the full scene's bounding box.
template <typename T>
Mat<T> make_features(const CubeSample<T>& sample, const LabeledCloud& cloud,
                     const BlockConfig& cfg) {
  const int n = int(sample.coords.rows());
  const double z_min = sample.coords.col(2).minCoeff();

  Mat<T> f(n, cfg.d_in());
  for (int i = 0; i < n; ++i) {
    f(i, 0) = T(sample.coords(i, 0) - sample.x0);
    f(i, 1) = T(sample.coords(i, 1) - sample.y0);
    f(i, 2) = T(sample.coords(i, 2) - z_min);
  }
  if (cfg.feature_mode == FeatureMode::Full9) {
    if (cloud.dims() != 6)
      throw ConfigError("FULL9 features require a 6-column cloud (xyz + rgb)");
    double lo[3], span[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = cloud.points.col(a).minCoeff();
      span[a] = cloud.points.col(a).maxCoeff() - lo[a];
    }
    for (int i = 0; i < n; ++i) {
      int src = sample.source_indices[i];
      for (int a = 0; a < 3; ++a) f(i, 3 + a) = T(cloud.points(src, 3 + a));
      for (int a = 0; a < 3; ++a)
        f(i, 6 + a) = span[a] > 0 ? T((sample.coords(i, a) - lo[a]) / span[a]) : T(0);
    }
  }
  return f;
}

// Per-point class vote counters for majority fusion across cubes.
struct MergeAccumulator {
  int num_classes = 0;
  std::vector<uint32_t> votes;  // n x K

  MergeAccumulator() = default;
  MergeAccumulator(int num_points, int k)
      : num_classes(k), votes(size_t(num_points) * k, 0) {}

  void add_vote(int point, int cls) { ++votes[size_t(point) * num_classes + cls]; }

  MergeAccumulator& operator+=(const MergeAccumulator& other) {
    if (votes.size() != other.votes.size() || num_classes != other.num_classes)
      throw ShapeError("merge accumulator shapes differ");
    for (size_t i = 0; i < votes.size(); ++i) votes[i] += other.votes[i];
    return *this;
  }
};

// Argmax vote per point, ties broken by smallest class index. A zero-vote
// point signals a split_cubes coverage bug.
inline std::vector<int> merge_votes(const MergeAccumulator& acc) {
  const int k = acc.num_classes;
  const int n = int(acc.votes.size()) / k;
  std::vector<int> labels(n);
  for (int p = 0; p < n; ++p) {
    uint32_t best = 0;
    int best_cls = -1;
    for (int c = 0; c < k; ++c) {
      uint32_t v = acc.votes[size_t(p) * k + c];
      if (v > best) {
        best = v;
        best_cls = c;
      }
    }
    if (best_cls < 0) throw CoverageError("point " + std::to_string(p) + " received no votes");
    labels[p] = best_cls;
  }
  return labels;
}

}  // namespace rsnet
