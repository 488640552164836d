#pragma once

#include <string>

#include "rsnet/common.hpp"

namespace rsnet {

// A 1x1 convolution over points is a shared affine map applied to every row.
template <typename T>
Mat<T> linear_pointwise_forward(const Mat<T>& F, const Mat<T>& W, const Mat<T>& b) {
  require_shape(F.cols() == W.rows(), "linear: F.cols != W.rows");
  require_shape(b.rows() == 1 && b.cols() == W.cols(), "linear: bias shape");
  Mat<T> out = F * W;
  out.rowwise() += b.row(0);
  return out;
}

template <typename T>
struct LinearGrads {
  Mat<T> F, W, b;
};

template <typename T>
LinearGrads<T> linear_pointwise_backward(const Mat<T>& F, const Mat<T>& W,
                                         const Mat<T>& grad_out) {
  require_shape(grad_out.rows() == F.rows() && grad_out.cols() == W.cols(),
                "linear backward: grad_out shape");
  LinearGrads<T> g;
  g.F = grad_out * W.transpose();
  g.W = F.transpose() * grad_out;
  g.b = grad_out.colwise().sum();
  return g;
}

template <typename T>
Mat<T> relu(const Mat<T>& F) {
  return F.cwiseMax(T(0));
}

// Strict inequality at 0: the kink routes no gradient.
template <typename T>
Mat<T> relu_backward(const Mat<T>& F, const Mat<T>& grad_out) {
  require_shape(F.rows() == grad_out.rows() && F.cols() == grad_out.cols(),
                "relu backward: shape");
  return (F.array() > T(0)).template cast<T>() * grad_out.array();
}

// Glorot-uniform fill: entries i.i.d. on [-a, a], a = sqrt(6/(fan_in+fan_out)).
template <typename T>
void init_uniform(Mat<T>& m, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / double(fan_in + fan_out));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = T(rng.uniform(-a, a));
}

template <typename T>
Mat<T> init_params(int rows, int cols, int fan_in, int fan_out, uint64_t seed) {
  Mat<T> m(rows, cols);
  Rng rng(seed);
  init_uniform(m, fan_in, fan_out, rng);
  return m;
}

// One named tensor with its gradient buffer.
template <typename T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

}  // namespace rsnet
