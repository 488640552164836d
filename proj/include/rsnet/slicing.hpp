#pragma once

#include <cstdint>
#include <vector>

#include "rsnet/common.hpp"

namespace rsnet {

enum class Axis : int { X = 0, Y = 1, Z = 2 };

// Instrumented point-touch counts. The forward counters back the complexity
// claims: pool+unpool forward touch each point exactly once per channel, so
// their sum is 2*n*c regardless of the slicing resolution.
struct SliceOpCounters {
  uint64_t pool_forward = 0;
  uint64_t unpool_forward = 0;
  uint64_t pool_backward = 0;
  uint64_t unpool_backward = 0;

  uint64_t forward_total() const { return pool_forward + unpool_forward; }
  void reset() { *this = SliceOpCounters{}; }
};

inline SliceOpCounters& slice_counters() {
  thread_local SliceOpCounters counters;
  return counters;
}

// Grouping of points into N contiguous slices along one axis.
// slice_of_point[i] = clamp(floor((coord_i - coord_min)/r), 0, N-1) and
// N = ceil((coord_max - coord_min)/r), at least 1. members[k] ascends.
struct SliceAssignment {
  Axis axis = Axis::Z;
  double resolution_r = 0.0;
  double coord_min = 0.0;
  int num_slices = 0;
  std::vector<int> slice_of_point;
  std::vector<std::vector<int>> members;

  int num_points() const { return int(slice_of_point.size()); }
};

inline SliceAssignment assign_slices(const Matd& coords, Axis axis, double r) {
  if (r <= 0.0) throw ConfigError("slicing resolution must be positive");
  require_shape(coords.cols() == 3 && coords.rows() >= 1, "assign_slices: coords must be n x 3");

  const int n = int(coords.rows());
  const int col = int(axis);
  double lo = coords(0, col), hi = coords(0, col);
  for (int i = 1; i < n; ++i) {
    double v = coords(i, col);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  SliceAssignment a;
  a.axis = axis;
  a.resolution_r = r;
  a.coord_min = lo;
  a.num_slices = std::max(1, int(std::ceil((hi - lo) / r)));
  a.slice_of_point.resize(n);
  a.members.resize(a.num_slices);
  for (int i = 0; i < n; ++i) {
    int k = int(std::floor((coords(i, col) - lo) / r));
    k = std::clamp(k, 0, a.num_slices - 1);  // coord_max at an exact multiple lands in N-1
    a.slice_of_point[i] = k;
    a.members[k].push_back(i);  // scan order keeps members ascending
  }
  return a;
}

// Which member supplied each pooled channel; needed to invert the max in the
// backward pass. Ties go to the smallest point index.
struct PoolRecord {
  Mat<int> argmax;                    // N x c, -1 on empty slices
  std::vector<uint8_t> empty_slice;   // N
};

template <typename T>
struct PoolResult {
  Mat<T> seq;  // N x c, ordered bottom-most slice first
  PoolRecord record;
};

template <typename T>
PoolResult<T> slice_pool_forward(const Mat<T>& F, const SliceAssignment& a) {
  require_shape(int(F.rows()) == a.num_points(), "slice_pool: F rows != assignment points");
  const int N = a.num_slices;
  const int c = int(F.cols());

  PoolResult<T> out;
  out.seq = Mat<T>::Zero(N, c);
  out.record.argmax = Mat<int>::Constant(N, c, -1);
  out.record.empty_slice.assign(N, 0);

  uint64_t touches = 0;
  for (int s = 0; s < N; ++s) {
    const auto& pts = a.members[s];
    if (pts.empty()) {
      out.record.empty_slice[s] = 1;  // zero row keeps downstream RNN inputs finite
      continue;
    }
    auto row = out.seq.row(s);
    auto arg = out.record.argmax.row(s);
    row = F.row(pts[0]);
    arg.setConstant(pts[0]);
    touches += uint64_t(c);
    for (size_t m = 1; m < pts.size(); ++m) {
      const int j = pts[m];
      for (int ch = 0; ch < c; ++ch) {
        if (F(j, ch) > row(ch)) {  // strict: first (smallest-index) max wins
          row(ch) = F(j, ch);
          arg(ch) = j;
        }
      }
      touches += uint64_t(c);
    }
  }
  slice_counters().pool_forward += touches;
  return out;
}

// Exact subgradient of the per-slice max: each pooled channel routes its
// gradient to the single recorded argmax point.
template <typename T>
Mat<T> slice_pool_backward(const Mat<T>& grad_seq, const PoolRecord& record, int n) {
  require_shape(grad_seq.rows() == record.argmax.rows() && grad_seq.cols() == record.argmax.cols(),
                "slice_pool_backward: grad_seq shape");
  const int N = int(grad_seq.rows());
  const int c = int(grad_seq.cols());
  Mat<T> grad_F = Mat<T>::Zero(n, c);
  uint64_t touches = 0;
  for (int s = 0; s < N; ++s) {
    if (record.empty_slice[s]) continue;
    for (int ch = 0; ch < c; ++ch) grad_F(record.argmax(s, ch), ch) += grad_seq(s, ch);
    touches += uint64_t(c);
  }
  slice_counters().pool_backward += touches;
  return grad_F;
}

// Replication: every point receives its slice's feature row.
template <typename T>
Mat<T> slice_unpool_forward(const Mat<T>& seq, const SliceAssignment& a) {
  require_shape(int(seq.rows()) == a.num_slices, "slice_unpool: seq rows != num slices");
  const int n = a.num_points();
  const int c = int(seq.cols());
  Mat<T> out(n, c);
  for (int j = 0; j < n; ++j) out.row(j) = seq.row(a.slice_of_point[j]);
  slice_counters().unpool_forward += uint64_t(n) * uint64_t(c);
  return out;
}

// Transpose of replication: slice gradient = sum over member points.
template <typename T>
Mat<T> slice_unpool_backward(const Mat<T>& grad_F, const SliceAssignment& a) {
  require_shape(int(grad_F.rows()) == a.num_points(), "slice_unpool_backward: grad rows");
  const int c = int(grad_F.cols());
  Mat<T> grad_seq = Mat<T>::Zero(a.num_slices, c);
  for (int j = 0; j < a.num_points(); ++j) grad_seq.row(a.slice_of_point[j]) += grad_F.row(j);
  slice_counters().unpool_backward += uint64_t(a.num_points()) * uint64_t(c);
  return grad_seq;
}

}  // namespace rsnet
