#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "rsnet/common.hpp"
#include "rsnet/nn.hpp"
#include "rsnet/rnn.hpp"
#include "rsnet/slicing.hpp"

namespace rsnet {

struct RSNetConfig {
  int num_classes = 13;
  int d_in = 9;  // 3 (xyz) or 9 (xyz + rgb + normalized xyz)
  std::vector<int> input_block_channels = {64, 64, 64};
  std::vector<int> output_block_channels = {512, 256};  // final layer is num_classes wide
  RnnStackConfig rnn;
  double r_x = 0.02, r_y = 0.02, r_z = 0.02;  // slicing resolutions, meters
  bool rnn_identity = false;  // ablation: slice sequences pass through unchanged

  double resolution(Axis a) const {
    switch (a) {
      case Axis::X: return r_x;
      case Axis::Y: return r_y;
      default: return r_z;
    }
  }

  int branch_output_channels() const {
    return rnn_identity ? input_block_channels.back() : rnn.layer_hidden_sizes.back();
  }
  // d_su: the three branches are concatenated channelwise
  int merged_channels() const { return 3 * branch_output_channels(); }

  void validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (d_in != 3 && d_in != 9) throw ConfigError("d_in must be 3 or 9");
    if (r_x <= 0 || r_y <= 0 || r_z <= 0) throw ConfigError("slicing resolutions must be positive");
    if (input_block_channels.empty() || output_block_channels.empty())
      throw ConfigError("feature blocks need at least one layer");
    if (rnn.layer_hidden_sizes.empty()) throw ConfigError("rnn stack needs at least one layer");
  }
};

template <typename T>
struct LinearLayer {
  Parameter<T> W, b;

  LinearLayer() = default;
  LinearLayer(int in, int out) : W("W", in, out), b("b", 1, out) {}
  void init(Rng& rng) {
    init_uniform(W.value, int(W.value.rows()), int(W.value.cols()), rng);
    b.value.setZero();
  }
};

template <typename T>
struct RSNetParams {
  RSNetConfig config;
  std::vector<LinearLayer<T>> input_block;
  std::array<RnnStack<T>, 3> branches;  // x, y, z
  std::vector<LinearLayer<T>> output_block;

  template <typename Fn>
  void visit(Fn&& fn) {
    static const char* axis_name[3] = {"x", "y", "z"};
    for (size_t i = 0; i < input_block.size(); ++i) {
      fn("input." + std::to_string(i) + ".W", input_block[i].W);
      fn("input." + std::to_string(i) + ".b", input_block[i].b);
    }
    for (int a = 0; a < 3; ++a) {
      for (size_t l = 0; l < branches[a].layers.size(); ++l) {
        auto& layer = branches[a].layers[l];
        std::string base = std::string("branch.") + axis_name[a] + "." + std::to_string(l) + ".";
        for (auto& p : layer.forward_cell.p) fn(base + "fwd." + p.name, p);
        for (auto& p : layer.backward_cell.p) fn(base + "bwd." + p.name, p);
      }
    }
    for (size_t i = 0; i < output_block.size(); ++i) {
      fn("output." + std::to_string(i) + ".W", output_block[i].W);
      fn("output." + std::to_string(i) + ".b", output_block[i].b);
    }
  }

  void zero_grads() {
    visit([](const std::string&, Parameter<T>& p) { p.zero_grad(); });
  }

  size_t tensor_count() {
    size_t n = 0;
    visit([&](const std::string&, Parameter<T>&) { ++n; });
    return n;
  }
};

template <typename T>
RSNetParams<T> build_rsnet(const RSNetConfig& config, uint64_t seed) {
  config.validate();
  RSNetParams<T> net;
  net.config = config;
  Rng rng(seed);

  int in = config.d_in;
  for (int out : config.input_block_channels) {
    net.input_block.emplace_back(in, out);
    in = out;
  }
  if (!config.rnn_identity) {
    for (int a = 0; a < 3; ++a)
      net.branches[a] = RnnStack<T>(config.input_block_channels.back(), config.rnn);
  }
  in = config.merged_channels();
  for (int out : config.output_block_channels) {
    net.output_block.emplace_back(in, out);
    in = out;
  }
  net.output_block.emplace_back(in, config.num_classes);  // logit layer, no activation

  for (auto& l : net.input_block) l.init(rng);
  if (!config.rnn_identity)
    for (int a = 0; a < 3; ++a) net.branches[a].init(rng);
  for (auto& l : net.output_block) l.init(rng);
  return net;
}

template <typename T>
struct RsnetCache {
  Mat<T> input;                           // n x d_in
  std::vector<Mat<T>> in_pre, in_act;     // per input-block layer
  std::array<SliceAssignment, 3> assign;
  std::array<PoolRecord, 3> pool_record;
  std::array<RnnStackCache<T>, 3> stack_cache;
  Mat<T> fsu;                             // n x d_su
  std::vector<Mat<T>> out_pre, out_act;   // out_act excludes the logit layer
  Mat<T> logits;
};

// Full forward pass over one cube sample: input block, three parallel
// slicing branches, channelwise concat, output block.
template <typename T>
Mat<T> rsnet_forward(const Mat<T>& features, const Matd& coords, const RSNetParams<T>& params,
                     RsnetCache<T>& cache) {
  const RSNetConfig& cfg = params.config;
  require_shape(int(features.cols()) == cfg.d_in, "rsnet_forward: feature width");
  require_shape(features.rows() == coords.rows() && coords.cols() == 3,
                "rsnet_forward: coords shape");
  const int n = int(features.rows());

  cache.input = features;
  cache.in_pre.clear();
  cache.in_act.clear();
  Mat<T> cur = features;
  for (const auto& layer : params.input_block) {
    cache.in_pre.push_back(linear_pointwise_forward(cur, layer.W.value, layer.b.value));
    cache.in_act.push_back(relu(cache.in_pre.back()));
    cur = cache.in_act.back();
  }
  const Mat<T>& f_in = cur;

  const int bc = cfg.branch_output_channels();
  cache.fsu.resize(n, 3 * bc);
  for (int a = 0; a < 3; ++a) {
    cache.assign[a] = assign_slices(coords, Axis(a), cfg.resolution(Axis(a)));
    auto pooled = slice_pool_forward(f_in, cache.assign[a]);
    cache.pool_record[a] = std::move(pooled.record);
    Mat<T> updated = cfg.rnn_identity
                         ? std::move(pooled.seq)
                         : stack_forward(params.branches[a], pooled.seq, cache.stack_cache[a]);
    cache.fsu.middleCols(a * bc, bc) = slice_unpool_forward(updated, cache.assign[a]);
  }

  cache.out_pre.clear();
  cache.out_act.clear();
  cur = cache.fsu;
  const size_t last = params.output_block.size() - 1;
  for (size_t i = 0; i < last; ++i) {
    const auto& layer = params.output_block[i];
    cache.out_pre.push_back(linear_pointwise_forward(cur, layer.W.value, layer.b.value));
    cache.out_act.push_back(relu(cache.out_pre.back()));
    cur = cache.out_act.back();
  }
  cache.logits = linear_pointwise_forward(cur, params.output_block[last].W.value,
                                          params.output_block[last].b.value);
  return cache.logits;
}

// Exact chain rule through every stage; parameter gradients accumulate into
// params, and the gradient w.r.t. the input features is returned.
template <typename T>
Mat<T> rsnet_backward(RSNetParams<T>& params, const RsnetCache<T>& cache,
                      const Mat<T>& grad_logits) {
  const RSNetConfig& cfg = params.config;
  const int n = int(cache.input.rows());
  require_shape(grad_logits.rows() == n && int(grad_logits.cols()) == cfg.num_classes,
                "rsnet_backward: grad_logits shape");

  // output block
  Mat<T> g = grad_logits;
  for (size_t i = params.output_block.size(); i-- > 0;) {
    auto& layer = params.output_block[i];
    const Mat<T>& in = (i == 0) ? cache.fsu : cache.out_act[i - 1];
    auto lg = linear_pointwise_backward(in, layer.W.value, g);
    layer.W.grad += lg.W;
    layer.b.grad += lg.b;
    g = std::move(lg.F);
    if (i > 0) g = relu_backward(cache.out_pre[i - 1], g);
  }

  // branches: gradients of the three concat blocks sum into grad f_in
  const int bc = cfg.branch_output_channels();
  Mat<T> grad_fin = Mat<T>::Zero(n, cfg.input_block_channels.back());
  for (int a = 0; a < 3; ++a) {
    Mat<T> grad_updated = slice_unpool_backward(Mat<T>(g.middleCols(a * bc, bc)), cache.assign[a]);
    Mat<T> grad_seq = cfg.rnn_identity
                          ? std::move(grad_updated)
                          : stack_backward(params.branches[a], cache.stack_cache[a], grad_updated);
    grad_fin += slice_pool_backward(grad_seq, cache.pool_record[a], n);
  }

  // input block
  g = std::move(grad_fin);
  for (size_t i = params.input_block.size(); i-- > 0;) {
    g = relu_backward(cache.in_pre[i], g);
    auto& layer = params.input_block[i];
    const Mat<T>& in = (i == 0) ? cache.input : cache.in_act[i - 1];
    auto lg = linear_pointwise_backward(in, layer.W.value, g);
    layer.W.grad += lg.W;
    layer.b.grad += lg.b;
    g = std::move(lg.F);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

template <typename T>
struct LossResult {
  T loss = T(0);
  Mat<T> grad_logits;
};

// Weighted softmax cross-entropy, normalized by the batch's mean weight so
// the loss scale is comparable across weighting schemes.
template <typename T>
LossResult<T> softmax_cross_entropy(const Mat<T>& logits, const std::vector<int>& labels,
                                    const std::vector<double>& class_weights = {}) {
  const int n = int(logits.rows());
  const int k = int(logits.cols());
  require_shape(int(labels.size()) == n, "cross_entropy: label count");
  if (!class_weights.empty() && int(class_weights.size()) != k)
    throw ShapeError("cross_entropy: weight count");

  LossResult<T> out;
  out.grad_logits.resize(n, k);
  double loss_sum = 0.0, weight_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || y >= k) throw ValidationError("cross_entropy: label out of range");
    double w = class_weights.empty() ? 1.0 : class_weights[y];

    // stabilized log-softmax
    T m = logits.row(i).maxCoeff();
    Eigen::Array<T, 1, Eigen::Dynamic> shifted = logits.row(i).array() - m;
    Eigen::Array<T, 1, Eigen::Dynamic> ex = shifted.exp();
    T z = ex.sum();
    loss_sum += w * double(std::log(z) - shifted(y));
    out.grad_logits.row(i) = (ex / z * T(w)).matrix();
    out.grad_logits(i, y) -= T(w);
    weight_sum += w;
  }
  if (weight_sum <= 0.0) throw ValidationError("cross_entropy: total weight is zero");
  out.loss = T(loss_sum / weight_sum);
  out.grad_logits *= T(1.0 / weight_sum);
  return out;
}

// w_c = median(positive class frequencies) / freq_c; absent classes get 0.
inline std::vector<double> median_freq_weights(const std::vector<int64_t>& label_counts) {
  int64_t total = 0;
  for (int64_t c : label_counts) {
    if (c < 0) throw ValidationError("median_freq_weights: negative count");
    total += c;
  }
  if (total == 0) throw ValidationError("median_freq_weights: all counts are zero");

  std::vector<double> freqs;
  for (int64_t c : label_counts)
    if (c > 0) freqs.push_back(double(c) / double(total));
  std::sort(freqs.begin(), freqs.end());
  size_t m = freqs.size();
  double median = (m % 2 == 1) ? freqs[m / 2] : 0.5 * (freqs[m / 2 - 1] + freqs[m / 2]);

  std::vector<double> weights(label_counts.size(), 0.0);
  for (size_t c = 0; c < label_counts.size(); ++c)
    if (label_counts[c] > 0) weights[c] = median / (double(label_counts[c]) / double(total));
  return weights;
}

}  // namespace rsnet
