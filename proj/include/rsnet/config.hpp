#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsnet/common.hpp"
#include "rsnet/model.hpp"
#include "rsnet/pipeline.hpp"
#include "rsnet/synth.hpp"

namespace rsnet {

// Flat `key = value` run configuration. Defaults follow the paper's baseline
// setting: 2cm slicing on all axes, 1m blocks, 1m test stride, GRU units,
// 4096 points per cube.
struct RunConfig {
  // pipeline
  double block_size = 1.0;
  double train_stride = 1.0;
  double test_stride = 1.0;
  int points_per_cube = 4096;
  std::string feature_mode = "xyz3";  // xyz3 | full9
  bool resample_each_epoch = true;

  // model
  int num_classes = 6;
  std::vector<int> input_channels = {64, 64, 64};
  std::vector<int> rnn_channels = {256, 128, 64, 64, 128, 256};
  std::vector<int> output_channels = {512, 256};
  std::string rnn_unit = "gru";  // vanilla | gru | lstm
  bool rnn_identity = false;
  double r_x = 0.02, r_y = 0.02, r_z = 0.02;

  // loss
  std::string class_weighting = "none";  // none | median

  // optimizer / training
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  int batch_cubes = 8;
  int epochs = 30;
  double early_stop_train_acc = 0.0;  // 0 disables
  std::string precision = "f32";      // f32 | f64
  int threads = 0;                    // 0 = hardware default
  uint64_t seed = 0;

  // paths
  std::string train_data, eval_data;
  std::string checkpoint = "rsnet.ckpt";
  std::vector<std::string> class_names;

  // synthetic generator
  std::string synth_mode = "room";  // room | context
  double synth_x_span = 4.0, synth_y_span = 4.0, synth_z_span = 3.0;
  bool synth_floor = true, synth_ceiling = true, synth_walls = true;
  int synth_tables = 2, synth_chairs = 3, synth_clutter = 4;
  double synth_density = 200.0;
  int synth_cells_x = 3, synth_cells_y = 3;
  double synth_pair_fraction = 1.0 / 3.0;

  void set(const std::string& key, const std::string& value);
  std::string serialize() const;

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string trimmed = detail_trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ": expected key = value at line " + std::to_string(line_no));
      cfg.set(detail_trim(trimmed.substr(0, eq)), detail_trim(trimmed.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::string trimmed = detail_trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      auto eq = trimmed.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value: " + trimmed);
      cfg.set(detail_trim(trimmed.substr(0, eq)), detail_trim(trimmed.substr(eq + 1)));
    }
    return cfg;
  }

  // "key=value" pairs from --set flags
  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
      set(detail_trim(kv.substr(0, eq)), detail_trim(kv.substr(eq + 1)));
    }
  }

  BlockConfig block_config() const {
    BlockConfig b;
    b.block_size_xy = block_size;
    b.train_stride = train_stride;
    b.test_stride = test_stride;
    b.points_per_cube = points_per_cube;
    b.feature_mode = parse_feature_mode(feature_mode);
    b.resample_each_epoch = resample_each_epoch;
    b.validate();
    return b;
  }

  RSNetConfig model_config() const {
    RSNetConfig m;
    m.num_classes = num_classes;
    m.d_in = block_config().d_in();
    m.input_block_channels = input_channels;
    m.output_block_channels = output_channels;
    m.rnn.layer_hidden_sizes = rnn_channels;
    m.rnn.variant = cell_variant_from_string(rnn_unit);
    m.rnn_identity = rnn_identity;
    m.r_x = r_x;
    m.r_y = r_y;
    m.r_z = r_z;
    m.validate();
    return m;
  }

  SceneSpec scene_spec() const {
    SceneSpec s;
    if (synth_mode == "room")
      s.mode = SceneMode::Room;
    else if (synth_mode == "context")
      s.mode = SceneMode::ContextTask;
    else
      throw ConfigError("synth_mode must be room or context");
    s.x_span = synth_x_span;
    s.y_span = synth_y_span;
    s.z_span = synth_z_span;
    s.floor = synth_floor;
    s.ceiling = synth_ceiling;
    s.walls = synth_walls;
    s.tables = synth_tables;
    s.chairs = synth_chairs;
    s.clutter = synth_clutter;
    s.surface_density = synth_density;
    s.cells_x = synth_cells_x;
    s.cells_y = synth_cells_y;
    s.pair_fraction = synth_pair_fraction;
    s.seed = seed;
    return s;
  }

  static FeatureMode parse_feature_mode(const std::string& s) {
    if (s == "xyz3") return FeatureMode::Xyz3;
    if (s == "full9") return FeatureMode::Full9;
    throw ConfigError("feature_mode must be xyz3 or full9");
  }

 private:
  static std::string detail_trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  static double to_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("bad numeric value for " + key + ": " + v);
    }
  }
  static int to_int(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      long l = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return int(l);
    } catch (const std::exception&) {
      throw ConfigError("bad integer value for " + key + ": " + v);
    }
  }
  static uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      unsigned long long l = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return uint64_t(l);
    } catch (const std::exception&) {
      throw ConfigError("bad integer value for " + key + ": " + v);
    }
  }
  static bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad boolean value for " + key + ": " + v);
  }
  static std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_int(key, detail_trim(item)));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
  }
  static std::vector<std::string> to_str_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = detail_trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  template <typename V>
  static std::string join(const std::vector<V>& values) {
    std::ostringstream out;
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out << ',';
      out << values[i];
    }
    return out.str();
  }
};

inline void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "block_size") block_size = to_double(key, value);
  else if (key == "train_stride") train_stride = to_double(key, value);
  else if (key == "test_stride") test_stride = to_double(key, value);
  else if (key == "points_per_cube") points_per_cube = to_int(key, value);
  else if (key == "feature_mode") { parse_feature_mode(value); feature_mode = value; }
  else if (key == "resample_each_epoch") resample_each_epoch = to_bool(key, value);
  else if (key == "num_classes") num_classes = to_int(key, value);
  else if (key == "input_channels") input_channels = to_int_list(key, value);
  else if (key == "rnn_channels") rnn_channels = to_int_list(key, value);
  else if (key == "output_channels") output_channels = to_int_list(key, value);
  else if (key == "rnn_unit") { cell_variant_from_string(value); rnn_unit = value; }
  else if (key == "rnn_identity") rnn_identity = to_bool(key, value);
  else if (key == "r_x") r_x = to_double(key, value);
  else if (key == "r_y") r_y = to_double(key, value);
  else if (key == "r_z") r_z = to_double(key, value);
  else if (key == "class_weighting") {
    if (value != "none" && value != "median")
      throw ConfigError("class_weighting must be none or median");
    class_weighting = value;
  }
  else if (key == "learning_rate") learning_rate = to_double(key, value);
  else if (key == "adam_beta1") adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") adam_eps = to_double(key, value);
  else if (key == "batch_cubes") batch_cubes = to_int(key, value);
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "early_stop_train_acc") early_stop_train_acc = to_double(key, value);
  else if (key == "precision") {
    if (value != "f32" && value != "f64") throw ConfigError("precision must be f32 or f64");
    precision = value;
  }
  else if (key == "threads") threads = to_int(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "train_data") train_data = value;
  else if (key == "eval_data") eval_data = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "class_names") class_names = to_str_list(value);
  else if (key == "synth_mode") synth_mode = value;
  else if (key == "synth_x_span") synth_x_span = to_double(key, value);
  else if (key == "synth_y_span") synth_y_span = to_double(key, value);
  else if (key == "synth_z_span") synth_z_span = to_double(key, value);
  else if (key == "synth_floor") synth_floor = to_bool(key, value);
  else if (key == "synth_ceiling") synth_ceiling = to_bool(key, value);
  else if (key == "synth_walls") synth_walls = to_bool(key, value);
  else if (key == "synth_tables") synth_tables = to_int(key, value);
  else if (key == "synth_chairs") synth_chairs = to_int(key, value);
  else if (key == "synth_clutter") synth_clutter = to_int(key, value);
  else if (key == "synth_density") synth_density = to_double(key, value);
  else if (key == "synth_cells_x") synth_cells_x = to_int(key, value);
  else if (key == "synth_cells_y") synth_cells_y = to_int(key, value);
  else if (key == "synth_pair_fraction") synth_pair_fraction = to_double(key, value);
  else throw ConfigError("unknown config key: " + key);
}

inline std::string RunConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "block_size = " << block_size << '\n'
      << "train_stride = " << train_stride << '\n'
      << "test_stride = " << test_stride << '\n'
      << "points_per_cube = " << points_per_cube << '\n'
      << "feature_mode = " << feature_mode << '\n'
      << "resample_each_epoch = " << (resample_each_epoch ? "true" : "false") << '\n'
      << "num_classes = " << num_classes << '\n'
      << "input_channels = " << join(input_channels) << '\n'
      << "rnn_channels = " << join(rnn_channels) << '\n'
      << "output_channels = " << join(output_channels) << '\n'
      << "rnn_unit = " << rnn_unit << '\n'
      << "rnn_identity = " << (rnn_identity ? "true" : "false") << '\n'
      << "r_x = " << r_x << '\n'
      << "r_y = " << r_y << '\n'
      << "r_z = " << r_z << '\n'
      << "class_weighting = " << class_weighting << '\n'
      << "learning_rate = " << learning_rate << '\n'
      << "adam_beta1 = " << adam_beta1 << '\n'
      << "adam_beta2 = " << adam_beta2 << '\n'
      << "adam_eps = " << adam_eps << '\n'
      << "batch_cubes = " << batch_cubes << '\n'
      << "epochs = " << epochs << '\n'
      << "early_stop_train_acc = " << early_stop_train_acc << '\n'
      << "precision = " << precision << '\n'
      << "threads = " << threads << '\n'
      << "seed = " << seed << '\n'
      << "train_data = " << train_data << '\n'
      << "eval_data = " << eval_data << '\n'
      << "checkpoint = " << checkpoint << '\n'
      << "class_names = " << join(class_names) << '\n'
      << "synth_mode = " << synth_mode << '\n'
      << "synth_x_span = " << synth_x_span << '\n'
      << "synth_y_span = " << synth_y_span << '\n'
      << "synth_z_span = " << synth_z_span << '\n'
      << "synth_floor = " << (synth_floor ? "true" : "false") << '\n'
      << "synth_ceiling = " << (synth_ceiling ? "true" : "false") << '\n'
      << "synth_walls = " << (synth_walls ? "true" : "false") << '\n'
      << "synth_tables = " << synth_tables << '\n'
      << "synth_chairs = " << synth_chairs << '\n'
      << "synth_clutter = " << synth_clutter << '\n'
      << "synth_density = " << synth_density << '\n'
      << "synth_cells_x = " << synth_cells_x << '\n'
      << "synth_cells_y = " << synth_cells_y << '\n'
      << "synth_pair_fraction = " << synth_pair_fraction << '\n';
  return out.str();
}

}  // namespace rsnet
