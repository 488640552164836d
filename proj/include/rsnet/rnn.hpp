#pragma once

#include <string>
#include <vector>

#include "rsnet/common.hpp"
#include "rsnet/nn.hpp"

namespace rsnet {

enum class CellVariant { Vanilla, Gru, Lstm };

inline std::string to_string(CellVariant v) {
  switch (v) {
    case CellVariant::Vanilla: return "vanilla";
    case CellVariant::Gru: return "gru";
    case CellVariant::Lstm: return "lstm";
  }
  return "?";
}

inline CellVariant cell_variant_from_string(const std::string& s) {
  if (s == "vanilla") return CellVariant::Vanilla;
  if (s == "gru") return CellVariant::Gru;
  if (s == "lstm") return CellVariant::Lstm;
  throw ConfigError("unknown rnn unit: " + s);
}

// Parameter slot layout per variant.
namespace cellslot {
// vanilla: h' = tanh(x Wx + h Wh + b)
constexpr int kWx = 0, kWh = 1, kB = 2;
// gru: z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
//      hc = tanh(x Wc + (r.h) Uc + bc), h' = (1-z).h + z.hc
constexpr int kWz = 0, kUz = 1, kBz = 2, kWr = 3, kUr = 4, kBr = 5, kWc = 6, kUc = 7, kBc = 8;
// lstm: i,f,o = sig(...), g = tanh(...), c' = f.c + i.g, h' = o.tanh(c')
constexpr int kWi = 0, kUi = 1, kBi = 2, kWf = 3, kUf = 4, kBf = 5, kWo = 6, kUo = 7, kBo = 8,
              kWg = 9, kUg = 10, kBg = 11;
}  // namespace cellslot

template <typename T>
Mat<T> sigmoid(const Mat<T>& a) {
  return (T(1) / (T(1) + (-a.array()).exp())).matrix();
}

template <typename T>
struct CellParams {
  CellVariant kind = CellVariant::Gru;
  int input_size = 0;
  int hidden_size = 0;
  std::vector<Parameter<T>> p;

  static const std::vector<std::string>& slot_names(CellVariant kind) {
    static const std::vector<std::string> vanilla = {"Wx", "Wh", "b"};
    static const std::vector<std::string> gru = {"Wz", "Uz", "bz", "Wr", "Ur", "br",
                                                 "Wc", "Uc", "bc"};
    static const std::vector<std::string> lstm = {"Wi", "Ui", "bi", "Wf", "Uf", "bf",
                                                  "Wo", "Uo", "bo", "Wg", "Ug", "bg"};
    switch (kind) {
      case CellVariant::Vanilla: return vanilla;
      case CellVariant::Gru: return gru;
      default: return lstm;
    }
  }

  CellParams() = default;
  CellParams(CellVariant k, int in, int h) : kind(k), input_size(in), hidden_size(h) {
    for (const auto& name : slot_names(k)) {
      bool is_bias = name[0] == 'b';
      bool is_recurrent = name[0] == 'U' || name == "Wh";
      int rows = is_bias ? 1 : (is_recurrent ? h : in);
      p.emplace_back(name, rows, h);
    }
  }

  void init(Rng& rng) {
    for (auto& param : p) {
      if (param.name[0] == 'b') {
        param.value.setZero();
        if (kind == CellVariant::Lstm && param.name == "bf")
          param.value.setConstant(T(1));  // standard forget-gate bias
      } else {
        init_uniform(param.value, int(param.value.rows()), int(param.value.cols()), rng);
      }
    }
  }

  const Mat<T>& w(int slot) const { return p[slot].value; }
  Mat<T>& g(int slot) { return p[slot].grad; }
};

template <typename T>
struct CellState {
  Mat<T> h;  // 1 x hidden
  Mat<T> c;  // 1 x hidden, LSTM only

  static CellState zero(const CellParams<T>& cell) {
    CellState s;
    s.h = Mat<T>::Zero(1, cell.hidden_size);
    s.c = Mat<T>::Zero(1, cell.hidden_size);
    return s;
  }
};

// Per-sequence cache of everything the backward pass needs. Row t always
// corresponds to sequence position t; `reversed` records the scan order.
template <typename T>
struct CellSeqCache {
  bool reversed = false;
  Mat<T> x;                    // N x in
  Mat<T> h;                    // N x hidden, state after the step at position t
  Mat<T> h0, c0;               // 1 x hidden initial state
  Mat<T> g1, g2, g3, g4;       // gates: gru z,r,hc / lstm i,f,o,g / vanilla unused
  Mat<T> rh;                   // gru: r (.) h_prev
  Mat<T> c, tanh_c;            // lstm
};

namespace detail {

template <typename T>
void cell_step(const CellParams<T>& cell, CellSeqCache<T>& cache, int t, const Mat<T>& h_prev,
               const Mat<T>& c_prev) {
  using namespace cellslot;
  const auto x = cache.x.row(t);
  switch (cell.kind) {
    case CellVariant::Vanilla: {
      Mat<T> a = x * cell.w(kWx) + h_prev * cell.w(kWh) + cell.w(kB);
      cache.h.row(t) = a.array().tanh();
      break;
    }
    case CellVariant::Gru: {
      Mat<T> z = sigmoid<T>(x * cell.w(kWz) + h_prev * cell.w(kUz) + cell.w(kBz));
      Mat<T> r = sigmoid<T>(x * cell.w(kWr) + h_prev * cell.w(kUr) + cell.w(kBr));
      Mat<T> rh = (r.array() * h_prev.array()).matrix();
      Mat<T> hc = (x * cell.w(kWc) + rh * cell.w(kUc) + cell.w(kBc)).array().tanh();
      cache.g1.row(t) = z;
      cache.g2.row(t) = r;
      cache.g3.row(t) = hc;
      cache.rh.row(t) = rh;
      cache.h.row(t) =
          ((T(1) - z.array()) * h_prev.array() + z.array() * hc.array()).matrix();
      break;
    }
    case CellVariant::Lstm: {
      Mat<T> i = sigmoid<T>(x * cell.w(kWi) + h_prev * cell.w(kUi) + cell.w(kBi));
      Mat<T> f = sigmoid<T>(x * cell.w(kWf) + h_prev * cell.w(kUf) + cell.w(kBf));
      Mat<T> o = sigmoid<T>(x * cell.w(kWo) + h_prev * cell.w(kUo) + cell.w(kBo));
      Mat<T> g = (x * cell.w(kWg) + h_prev * cell.w(kUg) + cell.w(kBg)).array().tanh();
      Mat<T> c_new = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
      Mat<T> tc = c_new.array().tanh().matrix();
      cache.g1.row(t) = i;
      cache.g2.row(t) = f;
      cache.g3.row(t) = o;
      cache.g4.row(t) = g;
      cache.c.row(t) = c_new;
      cache.tanh_c.row(t) = tc;
      cache.h.row(t) = (o.array() * tc.array()).matrix();
      break;
    }
  }
}

// One step of backprop through time at sequence position t. dh/dc carry the
// running gradient w.r.t. this step's output state; on return they hold the
// gradient w.r.t. the previous state. Parameter gradients accumulate.
template <typename T>
void cell_step_backward(CellParams<T>& cell, const CellSeqCache<T>& cache, int t,
                        const Mat<T>& h_prev, const Mat<T>& c_prev, Mat<T>& dh, Mat<T>& dc,
                        Mat<T>& dx_out) {
  using namespace cellslot;
  const auto x = cache.x.row(t);
  switch (cell.kind) {
    case CellVariant::Vanilla: {
      Mat<T> h = cache.h.row(t);
      Mat<T> da = (dh.array() * (T(1) - h.array().square())).matrix();
      dx_out = da * cell.w(kWx).transpose();
      cell.g(kWx) += x.transpose() * da;
      cell.g(kWh) += h_prev.transpose() * da;
      cell.g(kB) += da;
      dh = da * cell.w(kWh).transpose();
      break;
    }
    case CellVariant::Gru: {
      Mat<T> z = cache.g1.row(t), r = cache.g2.row(t), hc = cache.g3.row(t),
             rh = cache.rh.row(t);
      Mat<T> dz = (dh.array() * (hc.array() - h_prev.array())).matrix();
      Mat<T> dhc = (dh.array() * z.array()).matrix();
      Mat<T> dh_prev = (dh.array() * (T(1) - z.array())).matrix();
      Mat<T> dac = (dhc.array() * (T(1) - hc.array().square())).matrix();
      Mat<T> drh = dac * cell.w(kUc).transpose();
      Mat<T> dr = (drh.array() * h_prev.array()).matrix();
      dh_prev.array() += drh.array() * r.array();
      Mat<T> daz = (dz.array() * z.array() * (T(1) - z.array())).matrix();
      Mat<T> dar = (dr.array() * r.array() * (T(1) - r.array())).matrix();
      dh_prev += daz * cell.w(kUz).transpose() + dar * cell.w(kUr).transpose();
      dx_out = daz * cell.w(kWz).transpose() + dar * cell.w(kWr).transpose() +
               dac * cell.w(kWc).transpose();
      cell.g(kWz) += x.transpose() * daz;
      cell.g(kUz) += h_prev.transpose() * daz;
      cell.g(kBz) += daz;
      cell.g(kWr) += x.transpose() * dar;
      cell.g(kUr) += h_prev.transpose() * dar;
      cell.g(kBr) += dar;
      cell.g(kWc) += x.transpose() * dac;
      cell.g(kUc) += rh.transpose() * dac;
      cell.g(kBc) += dac;
      dh = dh_prev;
      break;
    }
    case CellVariant::Lstm: {
      Mat<T> i = cache.g1.row(t), f = cache.g2.row(t), o = cache.g3.row(t),
             g = cache.g4.row(t), tc = cache.tanh_c.row(t);
      Mat<T> do_ = (dh.array() * tc.array()).matrix();
      Mat<T> dcc = (dh.array() * o.array() * (T(1) - tc.array().square())).matrix() + dc;
      Mat<T> di = (dcc.array() * g.array()).matrix();
      Mat<T> df = (dcc.array() * c_prev.array()).matrix();
      Mat<T> dg = (dcc.array() * i.array()).matrix();
      Mat<T> dai = (di.array() * i.array() * (T(1) - i.array())).matrix();
      Mat<T> daf = (df.array() * f.array() * (T(1) - f.array())).matrix();
      Mat<T> dao = (do_.array() * o.array() * (T(1) - o.array())).matrix();
      Mat<T> dag = (dg.array() * (T(1) - g.array().square())).matrix();
      dc = (dcc.array() * f.array()).matrix();
      dx_out = dai * cell.w(kWi).transpose() + daf * cell.w(kWf).transpose() +
               dao * cell.w(kWo).transpose() + dag * cell.w(kWg).transpose();
      Mat<T> dh_prev = dai * cell.w(kUi).transpose() + daf * cell.w(kUf).transpose() +
                       dao * cell.w(kUo).transpose() + dag * cell.w(kUg).transpose();
      cell.g(kWi) += x.transpose() * dai;
      cell.g(kUi) += h_prev.transpose() * dai;
      cell.g(kBi) += dai;
      cell.g(kWf) += x.transpose() * daf;
      cell.g(kUf) += h_prev.transpose() * daf;
      cell.g(kBf) += daf;
      cell.g(kWo) += x.transpose() * dao;
      cell.g(kUo) += h_prev.transpose() * dao;
      cell.g(kBo) += dao;
      cell.g(kWg) += x.transpose() * dag;
      cell.g(kUg) += h_prev.transpose() * dag;
      cell.g(kBg) += dag;
      dh = dh_prev;
      break;
    }
  }
}

}  // namespace detail

// Single-timestep cell evaluation.
template <typename T>
CellState<T> cell_forward(const CellParams<T>& cell, const Mat<T>& x_t,
                          const CellState<T>& state) {
  require_shape(x_t.rows() == 1 && int(x_t.cols()) == cell.input_size, "cell_forward: x shape");
  require_shape(state.h.rows() == 1 && int(state.h.cols()) == cell.hidden_size,
                "cell_forward: state shape");
  CellSeqCache<T> cache;
  cache.x = x_t;
  cache.h.resize(1, cell.hidden_size);
  cache.g1.resize(1, cell.hidden_size);
  cache.g2.resize(1, cell.hidden_size);
  cache.g3.resize(1, cell.hidden_size);
  cache.g4.resize(1, cell.hidden_size);
  cache.rh.resize(1, cell.hidden_size);
  cache.c.resize(1, cell.hidden_size);
  cache.tanh_c.resize(1, cell.hidden_size);
  detail::cell_step(cell, cache, 0, state.h, state.c);
  CellState<T> out;
  out.h = cache.h;
  out.c = Mat<T>::Zero(1, cell.hidden_size);
  if (cell.kind == CellVariant::Lstm) out.c = cache.c;
  return out;
}

// Scans the whole sequence in one direction from a zero (or given) initial
// state. Output row t is the hidden state at sequence position t.
template <typename T>
Mat<T> cell_scan_forward(const CellParams<T>& cell, const Mat<T>& seq, bool reversed,
                         CellSeqCache<T>& cache) {
  require_shape(int(seq.cols()) == cell.input_size, "cell_scan: seq channels");
  const int N = int(seq.rows());
  const int h = cell.hidden_size;
  cache.reversed = reversed;
  cache.x = seq;
  cache.h.resize(N, h);
  cache.h0 = Mat<T>::Zero(1, h);
  cache.c0 = Mat<T>::Zero(1, h);
  if (cell.kind == CellVariant::Gru) {
    cache.g1.resize(N, h);
    cache.g2.resize(N, h);
    cache.g3.resize(N, h);
    cache.rh.resize(N, h);
  } else if (cell.kind == CellVariant::Lstm) {
    cache.g1.resize(N, h);
    cache.g2.resize(N, h);
    cache.g3.resize(N, h);
    cache.g4.resize(N, h);
    cache.c.resize(N, h);
    cache.tanh_c.resize(N, h);
  }

  Mat<T> h_prev = cache.h0, c_prev = cache.c0;
  for (int s = 0; s < N; ++s) {
    int t = reversed ? N - 1 - s : s;
    detail::cell_step(cell, cache, t, h_prev, c_prev);
    h_prev = cache.h.row(t);
    if (cell.kind == CellVariant::Lstm) c_prev = cache.c.row(t);
  }
  return cache.h;
}

// Backprop through time. grad_h_seq row t is dL/dh_t; returns dL/dseq and
// accumulates parameter gradients into the cell.
template <typename T>
Mat<T> cell_scan_backward(CellParams<T>& cell, const CellSeqCache<T>& cache,
                          const Mat<T>& grad_h_seq) {
  const int N = int(cache.x.rows());
  require_shape(int(grad_h_seq.rows()) == N && int(grad_h_seq.cols()) == cell.hidden_size,
                "cell_scan_backward: grad shape");
  Mat<T> grad_seq(N, cell.input_size);
  Mat<T> dh = Mat<T>::Zero(1, cell.hidden_size);
  Mat<T> dc = Mat<T>::Zero(1, cell.hidden_size);
  Mat<T> dx(1, cell.input_size);

  for (int s = N - 1; s >= 0; --s) {
    int t = cache.reversed ? N - 1 - s : s;
    // previous-state rows as seen by the forward scan
    int prev = cache.reversed ? t + 1 : t - 1;
    bool first = (prev < 0 || prev >= N);
    Mat<T> h_prev = first ? cache.h0 : Mat<T>(cache.h.row(prev));
    Mat<T> c_prev;
    if (cell.kind == CellVariant::Lstm)
      c_prev = first ? cache.c0 : Mat<T>(cache.c.row(prev));
    else
      c_prev = cache.c0;

    dh += grad_h_seq.row(t);
    detail::cell_step_backward(cell, cache, t, h_prev, c_prev, dh, dc, dx);
    grad_seq.row(t) = dx;
  }
  return grad_seq;
}

// ---------------------------------------------------------------------------
// Bidirectional layer and stack
// ---------------------------------------------------------------------------

template <typename T>
struct BiRnnLayer {
  CellParams<T> forward_cell;   // scans slice 0 -> N-1
  CellParams<T> backward_cell;  // scans slice N-1 -> 0

  BiRnnLayer() = default;
  BiRnnLayer(CellVariant kind, int in, int hidden)
      : forward_cell(kind, in, hidden), backward_cell(kind, in, hidden) {}

  void init(Rng& rng) {
    forward_cell.init(rng);
    backward_cell.init(rng);
  }
  int hidden_size() const { return forward_cell.hidden_size; }
  int input_size() const { return forward_cell.input_size; }
};

template <typename T>
struct BiRnnCache {
  CellSeqCache<T> fwd, bwd;
};

// SUM merge keeps the layer's output width equal to its hidden size.
template <typename T>
Mat<T> birnn_forward(const BiRnnLayer<T>& layer, const Mat<T>& seq, BiRnnCache<T>& cache) {
  Mat<T> hf = cell_scan_forward(layer.forward_cell, seq, false, cache.fwd);
  Mat<T> hb = cell_scan_forward(layer.backward_cell, seq, true, cache.bwd);
  return hf + hb;
}

template <typename T>
Mat<T> birnn_backward(BiRnnLayer<T>& layer, const BiRnnCache<T>& cache, const Mat<T>& grad_out) {
  Mat<T> g1 = cell_scan_backward(layer.forward_cell, cache.fwd, grad_out);
  Mat<T> g2 = cell_scan_backward(layer.backward_cell, cache.bwd, grad_out);
  return g1 + g2;
}

struct RnnStackConfig {
  std::vector<int> layer_hidden_sizes = {256, 128, 64, 64, 128, 256};
  CellVariant variant = CellVariant::Gru;
};

template <typename T>
struct RnnStack {
  std::vector<BiRnnLayer<T>> layers;

  RnnStack() = default;
  RnnStack(int input_size, const RnnStackConfig& cfg) {
    if (cfg.layer_hidden_sizes.empty()) throw ConfigError("rnn stack needs at least one layer");
    int in = input_size;
    for (int h : cfg.layer_hidden_sizes) {
      layers.emplace_back(cfg.variant, in, h);
      in = h;
    }
  }

  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }
  int output_size() const { return layers.back().hidden_size(); }
};

template <typename T>
struct RnnStackCache {
  std::vector<BiRnnCache<T>> layers;
};

template <typename T>
Mat<T> stack_forward(const RnnStack<T>& stack, const Mat<T>& seq, RnnStackCache<T>& cache) {
  cache.layers.resize(stack.layers.size());
  Mat<T> cur = seq;
  for (size_t l = 0; l < stack.layers.size(); ++l)
    cur = birnn_forward(stack.layers[l], cur, cache.layers[l]);
  return cur;
}

template <typename T>
Mat<T> stack_backward(RnnStack<T>& stack, const RnnStackCache<T>& cache, const Mat<T>& grad_out) {
  Mat<T> g = grad_out;
  for (size_t l = stack.layers.size(); l-- > 0;)
    g = birnn_backward(stack.layers[l], cache.layers[l], g);
  return g;
}

}  // namespace rsnet
