#pragma once

#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rsnet/cloud.hpp"
#include "rsnet/common.hpp"
#include "rsnet/config.hpp"
#include "rsnet/metrics.hpp"
#include "rsnet/model.hpp"
#include "rsnet/pipeline.hpp"

namespace rsnet {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step = 0;
  std::vector<Mat<T>> m, v;  // aligned with RSNetParams visit order

  void attach(RSNetParams<T>& params) {
    m.clear();
    v.clear();
    params.visit([&](const std::string&, Parameter<T>& p) {
      m.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
      v.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
    });
  }
};

// Standard Adam update with bias correction, consuming the accumulated
// parameter gradients.
template <typename T>
void adam_step(RSNetParams<T>& params, AdamState<T>& state) {
  ++state.step;
  const T b1 = T(state.beta1), b2 = T(state.beta2);
  const T corr1 = T(1.0 - std::pow(state.beta1, double(state.step)));
  const T corr2 = T(1.0 - std::pow(state.beta2, double(state.step)));
  const T lr = T(state.lr), eps = T(state.eps);
  size_t i = 0;
  params.visit([&](const std::string&, Parameter<T>& p) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (T(1) - b1) * p.grad;
    v = (b2 * v.array() + (T(1) - b2) * p.grad.array().square()).matrix();
    p.value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
    ++i;
  });
}

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

struct SceneCubes {
  std::vector<std::vector<CubeIndexSet>> per_scene;
  std::vector<std::pair<int, int>> flat;  // (scene, cube)
};

inline SceneCubes split_scenes(const std::vector<LabeledCloud>& scenes, const BlockConfig& cfg,
                               double stride) {
  SceneCubes out;
  out.per_scene.resize(scenes.size());
  for (size_t s = 0; s < scenes.size(); ++s) {
    out.per_scene[s] = split_cubes(scenes[s], cfg, stride);
    for (size_t c = 0; c < out.per_scene[s].size(); ++c)
      out.flat.emplace_back(int(s), int(c));
  }
  return out;
}

inline std::vector<double> resolve_class_weights(const RunConfig& cfg,
                                                 const std::vector<LabeledCloud>& scenes) {
  if (cfg.class_weighting != "median") return {};
  std::vector<int64_t> counts(cfg.num_classes, 0);
  for (const auto& scene : scenes)
    for (int l : scene.labels) {
      if (l >= cfg.num_classes) throw ValidationError("scene label exceeds num_classes");
      ++counts[l];
    }
  return median_freq_weights(counts);
}

namespace detail {

inline int resolved_threads(int requested) {
#ifdef _OPENMP
  return requested > 0 ? requested : omp_get_max_threads();
#else
  (void)requested;
  return 1;
#endif
}

// Seed tags keep the sampling streams of training, evaluation, and epoch
// shuffling disjoint.
constexpr uint64_t kTagTrainSample = 0x747261696eull;
constexpr uint64_t kTagEvalSample = 0x6576616cull;
constexpr uint64_t kTagShuffle = 0x73687566ull;

}  // namespace detail

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

template <typename T>
struct TrainState {
  RunConfig cfg;
  RSNetParams<T> params;
  AdamState<T> adam;
  int64_t epochs_done = 0;
};

template <typename T>
TrainState<T> init_training(const RunConfig& cfg) {
  TrainState<T> st;
  st.cfg = cfg;
  st.params = build_rsnet<T>(cfg.model_config(), cfg.seed);
  st.adam.lr = cfg.learning_rate;
  st.adam.beta1 = cfg.adam_beta1;
  st.adam.beta2 = cfg.adam_beta2;
  st.adam.eps = cfg.adam_eps;
  st.adam.attach(st.params);
  return st;
}

struct EpochStats {
  double mean_loss = 0.0;
  double train_acc = 0.0;  // argmax accuracy of this epoch's own forward passes
};

// One pass over all cubes in seeded shuffled order. Cubes inside a batch may
// run on several workers; per-cube gradients are reduced in cube order, so
// the result is bitwise identical at any thread count.
template <typename T>
EpochStats train_epoch(TrainState<T>& st, const std::vector<LabeledCloud>& scenes,
                       const SceneCubes& cubes, const std::vector<double>& class_weights) {
  const RunConfig& cfg = st.cfg;
  const BlockConfig block = cfg.block_config();
  const int64_t epoch = st.epochs_done;

  std::vector<int> order(cubes.flat.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(cfg.seed, detail::kTagShuffle, uint64_t(epoch)));
  shuffle_rng.shuffle(order.begin(), order.end());

  const int num_threads = detail::resolved_threads(cfg.threads);
  std::vector<RSNetParams<T>> clones(size_t(std::max(0, num_threads - 1)));

  double loss_sum = 0.0;
  int64_t cube_count = 0;
  int64_t correct_points = 0, total_points = 0;

  for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_cubes)) {
    const int bsz = int(std::min(size_t(cfg.batch_cubes), order.size() - start));
    for (auto& c : clones) c = st.params;  // refresh read-only values + private grad buffers

    std::vector<std::vector<Mat<T>>> cube_grads(bsz);
    std::vector<double> cube_loss(bsz, 0.0);
    std::vector<int64_t> cube_correct(bsz, 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(num_threads)
#endif
    for (int bi = 0; bi < bsz; ++bi) {
#ifdef _OPENMP
      const int tid = omp_get_thread_num();
#else
      const int tid = 0;
#endif
      RSNetParams<T>& net = (tid == 0) ? st.params : clones[tid - 1];
      net.zero_grads();

      auto [scene_idx, cube_idx] = cubes.flat[order[start + size_t(bi)]];
      const LabeledCloud& scene = scenes[scene_idx];
      uint64_t sample_seed =
          mix_seed(cfg.seed, detail::kTagTrainSample,
                   block.resample_each_epoch ? uint64_t(epoch) : 0ull,
                   uint64_t(scene_idx) << 20 | uint64_t(cube_idx));
      auto sample = sample_fixed<T>(cubes.per_scene[scene_idx][cube_idx], scene, block, sample_seed);
      sample.features = make_features(sample, scene, block);
      std::vector<int> labels(sample.source_indices.size());
      for (size_t i = 0; i < labels.size(); ++i) labels[i] = scene.labels[sample.source_indices[i]];

      RsnetCache<T> cache;
      Mat<T> logits = rsnet_forward(sample.features, sample.coords, net, cache);
      auto loss = softmax_cross_entropy(logits, labels, class_weights);
      cube_loss[bi] = double(loss.loss);
      for (int i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
          if (logits(i, c) > logits(i, best)) best = c;
        if (best == labels[size_t(i)]) ++cube_correct[bi];
      }
      rsnet_backward(net, cache, loss.grad_logits);

      auto& grads = cube_grads[bi];
      net.visit([&](const std::string&, Parameter<T>& p) { grads.push_back(p.grad); });
    }

    // ordered reduction: batch-mean gradient
    st.params.zero_grads();
    const T scale = T(1.0 / double(bsz));
    for (int bi = 0; bi < bsz; ++bi) {
      size_t t = 0;
      st.params.visit(
          [&](const std::string&, Parameter<T>& p) { p.grad += scale * cube_grads[bi][t++]; });
      loss_sum += cube_loss[bi];
      correct_points += cube_correct[bi];
      total_points += int64_t(cfg.points_per_cube);
      ++cube_count;
    }
    adam_step(st.params, st.adam);
  }

  ++st.epochs_done;
  EpochStats stats;
  stats.mean_loss = cube_count ? loss_sum / double(cube_count) : 0.0;
  stats.train_acc = total_points ? double(correct_points) / double(total_points) : 0.0;
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation / prediction
// ---------------------------------------------------------------------------

// Per-point predictions for one scene: test-stride cubes, per-cube forward,
// majority vote across overlapping predictions. Never mutates parameters.
template <typename T>
std::vector<int> predict_scene(const RSNetParams<T>& params, const LabeledCloud& scene,
                               const RunConfig& cfg) {
  const BlockConfig block = cfg.block_config();
  auto cubes = split_cubes(scene, block, block.test_stride);
  const int k = params.config.num_classes;
  const int num_threads = detail::resolved_threads(cfg.threads);

  std::vector<MergeAccumulator> partial(cubes.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(num_threads)
#endif
  for (size_t ci = 0; ci < cubes.size(); ++ci) {
    uint64_t sample_seed = mix_seed(cfg.seed, detail::kTagEvalSample, uint64_t(ci));
    auto samples = sample_covering<T>(cubes[ci], scene, block, sample_seed);

    MergeAccumulator local(scene.size(), k);
    for (auto& sample : samples) {
      sample.features = make_features(sample, scene, block);
      RsnetCache<T> cache;
      Mat<T> logits = rsnet_forward(sample.features, sample.coords, params, cache);
      for (int i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < k; ++c)
          if (logits(i, c) > logits(i, best)) best = c;
        local.add_vote(sample.source_indices[i], best);
      }
    }
    partial[ci] = std::move(local);
  }

  MergeAccumulator acc(scene.size(), k);
  for (auto& p : partial) acc += p;  // integer counters: order-independent
  return merge_votes(acc);
}

struct EvalResult {
  ConfusionMatrix cm;
  std::string report;
};

template <typename T>
EvalResult evaluate(const RSNetParams<T>& params, const std::vector<LabeledCloud>& scenes,
                    const RunConfig& cfg) {
  ConfusionMatrix cm(params.config.num_classes);
  for (const auto& scene : scenes) {
    if (!scene.has_labels()) throw ValidationError("evaluate requires labeled scenes");
    auto predicted = predict_scene(params, scene, cfg);
    confusion_update(cm, scene.labels, predicted);
  }
  EvalResult out;
  out.cm = cm;
  out.report = metrics_report(cm, cfg.class_names);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "RSNCKPT1", little-endian, config text length-prefixed,
// then named tensors as (name_len, name, rank, dims..., f32 data).
// ---------------------------------------------------------------------------

struct CheckpointTensor {
  std::string name;
  Matf data;
};

struct Checkpoint {
  std::string config_text;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

inline void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
inline uint64_t read_u64(std::istream& in, const std::string& path) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw ParseError(path + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write("RSNCKPT1", 8);
  detail::write_u64(out, ckpt.config_text.size());
  out.write(ckpt.config_text.data(), std::streamsize(ckpt.config_text.size()));
  detail::write_u64(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    detail::write_u64(out, t.name.size());
    out.write(t.name.data(), std::streamsize(t.name.size()));
    detail::write_u64(out, 2);
    detail::write_u64(out, uint64_t(t.data.rows()));
    detail::write_u64(out, uint64_t(t.data.cols()));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              std::streamsize(sizeof(float) * size_t(t.data.size())));
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8)) throw ParseError(path + ": truncated checkpoint");
  if (std::memcmp(magic, "RSNCKPT", 7) != 0)
    throw ParseError(path + ": not an RSNCKPT checkpoint");
  if (magic[7] != '1') throw VersionError(path + ": unsupported checkpoint version");

  Checkpoint ckpt;
  uint64_t config_len = detail::read_u64(in, path);
  ckpt.config_text.resize(config_len);
  if (!in.read(ckpt.config_text.data(), std::streamsize(config_len)))
    throw ParseError(path + ": truncated checkpoint");
  uint64_t count = detail::read_u64(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    uint64_t name_len = detail::read_u64(in, path);
    t.name.resize(name_len);
    if (!in.read(t.name.data(), std::streamsize(name_len)))
      throw ParseError(path + ": truncated checkpoint");
    uint64_t rank = detail::read_u64(in, path);
    if (rank != 2) throw ParseError(path + ": unexpected tensor rank");
    uint64_t rows = detail::read_u64(in, path);
    uint64_t cols = detail::read_u64(in, path);
    t.data.resize(Eigen::Index(rows), Eigen::Index(cols));
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 std::streamsize(sizeof(float) * rows * cols)))
      throw ParseError(path + ": truncated checkpoint");
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

// Snapshot of the whole training state. Tensors are always stored as 32-bit
// reals; in f32 training mode the roundtrip is bit-exact.
template <typename T>
Checkpoint make_checkpoint(TrainState<T>& st) {
  Checkpoint ckpt;
  ckpt.config_text = st.cfg.serialize();
  st.params.visit([&](const std::string& name, Parameter<T>& p) {
    ckpt.tensors.push_back({name, p.value.template cast<float>()});
  });
  size_t i = 0;
  st.params.visit([&](const std::string& name, Parameter<T>&) {
    ckpt.tensors.push_back({"adam.m." + name, st.adam.m[i].template cast<float>()});
    ckpt.tensors.push_back({"adam.v." + name, st.adam.v[i].template cast<float>()});
    ++i;
  });
  Matf meta(1, 1);
  meta(0, 0) = float(st.epochs_done);
  ckpt.tensors.push_back({"meta.epoch", meta});
  meta(0, 0) = float(st.adam.step);
  ckpt.tensors.push_back({"meta.adam_step", meta});
  return ckpt;
}

template <typename T>
TrainState<T> restore_training(const Checkpoint& ckpt) {
  RunConfig cfg = RunConfig::from_text(ckpt.config_text);
  TrainState<T> st = init_training<T>(cfg);

  auto require_tensor = [&](const std::string& name) -> const CheckpointTensor& {
    const CheckpointTensor* t = ckpt.find(name);
    if (!t) throw ParseError("checkpoint missing tensor " + name);
    return *t;
  };

  size_t i = 0;
  st.params.visit([&](const std::string& name, Parameter<T>& p) {
    const auto& t = require_tensor(name);
    require_shape(t.data.rows() == p.value.rows() && t.data.cols() == p.value.cols(),
                  "checkpoint tensor shape mismatch: " + name);
    p.value = t.data.template cast<T>();
    const auto& m = require_tensor("adam.m." + name);
    const auto& v = require_tensor("adam.v." + name);
    st.adam.m[i] = m.data.template cast<T>();
    st.adam.v[i] = v.data.template cast<T>();
    ++i;
  });
  st.epochs_done = int64_t(require_tensor("meta.epoch").data(0, 0));
  st.adam.step = int64_t(require_tensor("meta.adam_step").data(0, 0));
  return st;
}

}  // namespace rsnet
