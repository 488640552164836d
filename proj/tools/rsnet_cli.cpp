// rsnet command-line driver: synthetic data generation, training, evaluation,
// prediction, gradient checking, slice-op benchmarking, and ablation sweeps.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsnet/rsnet.hpp"

namespace fs = std::filesystem;
using namespace rsnet;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run-config file (key = value lines)");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set r_z=0.05")
      ->take_all();
  cmd->add_option("--seed", args.seed, "override the master seed");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig() : RunConfig::from_file(args.config_path);
  cfg.apply_overrides(args.overrides);
  if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
  return cfg;
}

void ensure_parent_dir(const std::string& path) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// A data path is a single .rsnpc file, a comma-separated list, or a
// directory holding *.rsnpc files (loaded in name order).
std::vector<LabeledCloud> load_scenes(const std::string& spec) {
  if (spec.empty()) throw ConfigError("no data path given");
  std::vector<std::string> paths;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (fs::is_directory(item)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(item))
        if (e.path().extension() == ".rsnpc") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(item);
    }
  }
  if (paths.empty()) throw ConfigError("no .rsnpc scenes found under " + spec);
  std::vector<LabeledCloud> scenes;
  for (const auto& p : paths) scenes.push_back(read_cloud(p));
  return scenes;
}

void print_per_class_table(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  auto iou = per_class_iou(cm);
  std::printf("%-14s %8s %8s\n", "class", "iou", "acc");
  for (int c = 0; c < cm.num_classes; ++c) {
    int64_t row = 0;
    for (int j = 0; j < cm.num_classes; ++j) row += cm.at(c, j);
    std::string name = c < int(names.size()) ? names[c] : "class" + std::to_string(c);
    if (iou[c] < 0 && row == 0) continue;  // absent everywhere
    double acc = row > 0 ? double(cm.at(c, c)) / double(row) : 0.0;
    std::printf("%-14s %8.4f %8.4f\n", name.c_str(), iou[c] < 0 ? 0.0 : iou[c], acc);
  }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& common, const std::string& out, int count) {
  RunConfig cfg = load_config(common);
  SceneSpec spec = cfg.scene_spec();
  for (int i = 0; i < count; ++i) {
    SceneSpec s = spec;
    if (count > 1) s.seed = mix_seed(spec.seed, uint64_t(i));
    LabeledCloud cloud = generate_scene(s);
    std::string path = out;
    if (count > 1) {
      fs::path p(out);
      path = (p.parent_path() / (p.stem().string() + "_" + std::to_string(i) +
                                 (p.extension().empty() ? ".rsnpc" : p.extension().string())))
                 .string();
    }
    ensure_parent_dir(path);
    write_cloud(cloud, path);
    std::printf("wrote %s: %d points, %d classes\n", path.c_str(), cloud.size(),
                cloud.num_classes);
  }
  return 0;
}

template <typename T>
int run_training(RunConfig cfg, bool resume) {
  auto scenes = load_scenes(cfg.train_data);
  for (const auto& s : scenes)
    if (!s.has_labels()) throw ValidationError("training scenes must be labeled");

  TrainState<T> st;
  if (resume) {
    st = restore_training<T>(load_checkpoint(cfg.checkpoint));
    // model- and data-defining keys come from the checkpoint; progress
    // targets and runtime knobs follow the caller
    st.cfg.train_data = cfg.train_data;
    st.cfg.eval_data = cfg.eval_data;
    st.cfg.checkpoint = cfg.checkpoint;
    st.cfg.epochs = cfg.epochs;
    st.cfg.threads = cfg.threads;
    st.cfg.early_stop_train_acc = cfg.early_stop_train_acc;
    st.cfg.class_names = cfg.class_names;
    std::printf("resumed from %s at epoch %lld\n", cfg.checkpoint.c_str(),
                (long long)st.epochs_done);
  } else {
    st = init_training<T>(cfg);
  }

  const BlockConfig block = st.cfg.block_config();
  auto cubes = split_scenes(scenes, block, block.train_stride);
  auto weights = resolve_class_weights(st.cfg, scenes);

  while (st.epochs_done < st.cfg.epochs) {
    auto stats = train_epoch(st, scenes, cubes, weights);
    std::printf("epoch %lld loss %.6f train_acc %.4f\n", (long long)st.epochs_done,
                stats.mean_loss, stats.train_acc);
    std::fflush(stdout);
    if (st.cfg.early_stop_train_acc > 0.0 && stats.train_acc >= st.cfg.early_stop_train_acc)
      break;
  }

  ensure_parent_dir(st.cfg.checkpoint);
  save_checkpoint(make_checkpoint(st), st.cfg.checkpoint);
  std::printf("checkpoint written to %s\n", st.cfg.checkpoint.c_str());

  if (!st.cfg.eval_data.empty()) {
    auto eval_scenes = load_scenes(st.cfg.eval_data);
    auto result = evaluate(st.params, eval_scenes, st.cfg);
    std::fputs(result.report.c_str(), stdout);
  }
  return 0;
}

int cmd_train(const CommonArgs& common, bool resume) {
  RunConfig cfg = load_config(common);
  if (cfg.precision == "f64") return run_training<double>(cfg, resume);
  return run_training<float>(cfg, resume);
}

template <typename T>
int run_eval(RunConfig cfg, const std::string& data) {
  TrainState<T> st = restore_training<T>(load_checkpoint(cfg.checkpoint));
  // evaluation-time knobs (stride, paths, threads) come from the caller
  st.cfg.test_stride = cfg.test_stride;
  st.cfg.threads = cfg.threads;
  st.cfg.seed = cfg.seed;
  st.cfg.class_names = cfg.class_names.empty() ? st.cfg.class_names : cfg.class_names;
  auto scenes = load_scenes(data.empty() ? cfg.eval_data : data);
  auto result = evaluate(st.params, scenes, st.cfg);
  std::fputs(result.report.c_str(), stdout);
  print_per_class_table(result.cm, st.cfg.class_names);
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& data, const std::string& ckpt) {
  RunConfig cfg = load_config(common);
  if (!ckpt.empty()) cfg.checkpoint = ckpt;
  if (cfg.precision == "f64") return run_eval<double>(cfg, data);
  return run_eval<float>(cfg, data);
}

template <typename T>
int run_predict(RunConfig cfg, const std::string& in_path, const std::string& out_path) {
  TrainState<T> st = restore_training<T>(load_checkpoint(cfg.checkpoint));
  st.cfg.test_stride = cfg.test_stride;
  st.cfg.threads = cfg.threads;
  st.cfg.seed = cfg.seed;
  LabeledCloud cloud = read_cloud(in_path);
  LabeledCloud out = cloud;
  out.labels = predict_scene(st.params, cloud, st.cfg);
  out.num_classes = st.cfg.num_classes;
  ensure_parent_dir(out_path);
  write_cloud(out, out_path);
  std::printf("wrote %s with predicted labels\n", out_path.c_str());
  return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& in_path,
                const std::string& out_path, const std::string& ckpt) {
  RunConfig cfg = load_config(common);
  if (!ckpt.empty()) cfg.checkpoint = ckpt;
  if (cfg.precision == "f64") return run_predict<double>(cfg, in_path, out_path);
  return run_predict<float>(cfg, in_path, out_path);
}

int cmd_gradcheck(int seeds) {
  auto t0 = std::chrono::steady_clock::now();
  auto results = gradcheck_suite::run_full_suite(seeds);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-16s max_rel_err %.3e  %s\n", r.op.c_str(), r.max_rel_err,
                r.pass ? "pass" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("gradcheck %s in %.1fs (%d seeds per op)\n", all_pass ? "passed" : "FAILED", secs,
              seeds);
  return all_pass ? 0 : 1;
}

// Slice pool+unpool timing and touch counts across n and r. The counts back
// the complexity claims; wall clock is informational.
int cmd_bench(const std::vector<int>& ns, const std::vector<double>& rs, int channels,
              uint64_t seed) {
  std::printf("%-8s %-8s %-10s %-14s %-14s %-12s\n", "n", "r_m", "slices", "fwd_touches",
              "bwd_touches", "wall_us");
  for (int n : ns) {
    Rng rng(mix_seed(seed, uint64_t(n)));
    Matd coords(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) coords(i, j) = rng.uniform();
    Matd F(n, channels);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < channels; ++j) F(i, j) = rng.normal();

    for (double r : rs) {
      auto a = assign_slices(coords, Axis::Z, r);
      slice_counters().reset();
      auto t0 = std::chrono::steady_clock::now();
      auto pooled = slice_pool_forward(F, a);
      Mat<double> up = slice_unpool_forward(pooled.seq, a);
      Mat<double> gseq = slice_unpool_backward(up, a);
      Mat<double> gF = slice_pool_backward(gseq, pooled.record, n);
      double us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
                      .count();
      auto& c = slice_counters();
      std::printf("%-8d %-8.3f %-10d %-14llu %-14llu %-12.1f\n", n, r, a.num_slices,
                  (unsigned long long)c.forward_total(),
                  (unsigned long long)(c.pool_backward + c.unpool_backward), us);
    }
  }
  return 0;
}

// One train+eval row per grid cell, mirroring the shape of the paper's
// ablation tables (slicing resolution / block size / test stride / RNN unit).
int cmd_sweep(const CommonArgs& common, const std::string& grid) {
  RunConfig base = load_config(common);
  auto train_scenes = load_scenes(base.train_data);
  auto eval_spec = base.eval_data.empty() ? base.train_data : base.eval_data;

  struct Cell {
    std::string label;
    RunConfig cfg;
  };
  std::vector<Cell> cells;
  auto add = [&](const std::string& label, RunConfig cfg) { cells.push_back({label, cfg}); };

  if (grid == "resolution" || grid == "all") {
    for (double rz : {0.01, 0.02, 0.05, 0.08}) {
      RunConfig c = base;
      c.r_z = rz;
      add("grid=resolution r_z=" + std::to_string(rz), c);
    }
  }
  if (grid == "block" || grid == "all") {
    for (double bs : {1.0, 2.0, 3.0}) {
      RunConfig c = base;
      c.block_size = bs;
      c.train_stride = bs;
      c.test_stride = bs;
      add("grid=block bs=" + std::to_string(bs), c);
    }
  }
  if (grid == "stride" || grid == "all") {
    for (double f : {0.2, 0.5, 1.0}) {
      RunConfig c = base;
      c.test_stride = f * c.block_size;
      add("grid=stride stride=" + std::to_string(c.test_stride), c);
    }
  }
  if (grid == "unit" || grid == "all") {
    for (const char* unit : {"vanilla", "gru", "lstm"}) {
      RunConfig c = base;
      c.rnn_unit = unit;
      add(std::string("grid=unit unit=") + unit, c);
    }
  }
  if (cells.empty()) throw ConfigError("unknown sweep grid: " + grid);

  auto eval_scenes = load_scenes(eval_spec);
  for (auto& cell : cells) {
    TrainState<float> st = init_training<float>(cell.cfg);
    const BlockConfig block = cell.cfg.block_config();
    auto cubes = split_scenes(train_scenes, block, block.train_stride);
    auto weights = resolve_class_weights(cell.cfg, train_scenes);
    EpochStats stats;
    for (int e = 0; e < cell.cfg.epochs; ++e) stats = train_epoch(st, train_scenes, cubes, weights);
    auto result = evaluate(st.params, eval_scenes, st.cfg);
    std::printf("%s loss=%.4f miou=%.4f macc=%.4f oacc=%.4f\n", cell.label.c_str(),
                stats.mean_loss, miou(result.cm), macc(result.cm), overall_acc(result.cm));
    std::fflush(stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent slice network for point-cloud semantic segmentation"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, eval_args, predict_args, sweep_args;

  auto* synth = app.add_subcommand("synth", "generate synthetic labeled scenes");
  std::string synth_out = "scene.rsnpc";
  int synth_count = 1;
  add_common(synth, synth_args);
  synth->add_option("--out", synth_out, "output path (suffix _<i> added when --count > 1)");
  synth->add_option("--count", synth_count, "number of scenes");

  auto* train = app.add_subcommand("train", "train a model");
  bool resume = false;
  add_common(train, train_args);
  train->add_flag("--resume", resume, "resume from the configured checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt;
  add_common(eval, eval_args);
  eval->add_option("--data", eval_data, "scenes to evaluate");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path");

  auto* predict = app.add_subcommand("predict", "write a cloud with predicted labels");
  std::string pred_in, pred_out = "predicted.rsnpc", pred_ckpt;
  add_common(predict, predict_args);
  predict->add_option("--in", pred_in, "input cloud")->required();
  predict->add_option("--out", pred_out, "output cloud");
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint path");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op");
  int gc_seeds = 20;
  gradcheck->add_option("--seeds", gc_seeds, "seeds per op");

  auto* bench = app.add_subcommand("bench", "slice-op complexity benchmark");
  std::string bench_ns = "1024,2048,4096", bench_rs = "0.01,0.02,0.05,0.08";
  int bench_channels = 64;
  int64_t bench_seed = 0;
  bench->add_option("--ns", bench_ns, "comma list of point counts");
  bench->add_option("--rs", bench_rs, "comma list of slicing resolutions (m)");
  bench->add_option("--channels", bench_channels, "feature channels");
  bench->add_option("--seed", bench_seed, "rng seed");

  auto* sweep = app.add_subcommand("sweep", "ablation grids: train+eval one row per cell");
  std::string sweep_grid = "all";
  add_common(sweep, sweep_args);
  sweep->add_option("--grid", sweep_grid, "resolution | block | stride | unit | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage/help
    return e.get_name() == "CallForHelp" ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args, synth_out, synth_count);
    if (train->parsed()) return cmd_train(train_args, resume);
    if (eval->parsed()) return cmd_eval(eval_args, eval_data, eval_ckpt);
    if (predict->parsed()) return cmd_predict(predict_args, pred_in, pred_out, pred_ckpt);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seeds);
    if (bench->parsed()) {
      std::vector<int> ns;
      std::vector<double> rs;
      std::istringstream nin(bench_ns), rin(bench_rs);
      std::string item;
      while (std::getline(nin, item, ',')) ns.push_back(std::stoi(item));
      while (std::getline(rin, item, ',')) rs.push_back(std::stod(item));
      return cmd_bench(ns, rs, bench_channels, uint64_t(bench_seed));
    }
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_grid);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
