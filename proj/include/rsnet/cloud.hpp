#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsnet/common.hpp"

namespace rsnet {

// A labeled point cloud. Columns 0-2 of points are x,y,z in meters;
// columns 3-5, when present, are RGB intensities in [0,1].
struct LabeledCloud {
  Matd points;              // n x d_raw, d_raw in {3, 6}
  std::vector<int> labels;  // empty, or size n with values in [0, num_classes)
  int num_classes = 0;

  int size() const { return int(points.rows()); }
  int dims() const { return int(points.cols()); }
  bool has_labels() const { return !labels.empty(); }

  void validate() const {
    if (points.rows() < 1) throw ValidationError("cloud must contain at least one point");
    if (points.cols() != 3 && points.cols() != 6)
      throw ValidationError("cloud must have 3 or 6 raw feature columns");
    if (!points.allFinite()) throw ValidationError("cloud contains non-finite coordinates");
    if (has_labels()) {
      if (int(labels.size()) != size()) throw ValidationError("label count does not match point count");
      for (int l : labels) {
        if (l < 0 || l >= num_classes) throw ValidationError("label out of range");
      }
    }
  }
};

namespace detail {

inline bool is_comment_or_blank(const std::string& line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(ch))) return false;
  }
  return true;  // blank
}

}  // namespace detail

// RSNPC text format, version 1.
//   line 1:      RSNPC 1 <n> <d_raw> <has_labels:0|1>
//   lines 2..n+1: d_raw reals, then one integer label when has_labels=1
// '#' begins a comment line.
inline LabeledCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  int line_no = 0;
  auto next_data_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::is_comment_or_blank(line)) return true;
    }
    if (required)
      throw ParseError(path + ": unexpected end of file at line " + std::to_string(line_no + 1));
    return false;
  };

  next_data_line(true);
  std::istringstream hdr(line);
  std::string magic;
  long version = -1, n = -1, d_raw = -1, has_labels = -1;
  if (!(hdr >> magic >> version >> n >> d_raw >> has_labels) || magic != "RSNPC")
    throw ParseError(path + ": malformed header at line " + std::to_string(line_no));
  if (version != 1)
    throw ParseError(path + ": unsupported RSNPC version at line " + std::to_string(line_no));
  if (n < 1 || (d_raw != 3 && d_raw != 6) || (has_labels != 0 && has_labels != 1))
    throw ParseError(path + ": invalid header fields at line " + std::to_string(line_no));

  LabeledCloud cloud;
  cloud.points.resize(n, d_raw);
  if (has_labels) cloud.labels.resize(n);

  for (long i = 0; i < n; ++i) {
    next_data_line(true);
    std::istringstream row(line);
    std::string token;
    for (long j = 0; j < d_raw; ++j) {
      if (!(row >> token))
        throw ParseError(path + ": expected " + std::to_string(d_raw) +
                         " values at line " + std::to_string(line_no));
      char* end = nullptr;
      double v = std::strtod(token.c_str(), &end);  // strtod accepts nan/inf tokens
      if (end == token.c_str() || *end != '\0')
        throw ParseError(path + ": bad number '" + token + "' at line " +
                         std::to_string(line_no));
      if (!std::isfinite(v))
        throw ValidationError(path + ": non-finite value at line " + std::to_string(line_no));
      cloud.points(i, j) = v;
    }
    if (has_labels) {
      long l;
      if (!(row >> l))
        throw ParseError(path + ": missing label at line " + std::to_string(line_no));
      if (l < 0) throw ValidationError(path + ": label out of range at line " + std::to_string(line_no));
      cloud.labels[i] = int(l);
    }
    std::string trailing;
    if (row >> trailing)
      throw ParseError(path + ": trailing data at line " + std::to_string(line_no));
  }
  if (next_data_line(false))
    throw ParseError(path + ": extra data row at line " + std::to_string(line_no) +
                     " (header declared n=" + std::to_string(n) + ")");

  // The format carries no class count; infer the smallest consistent one.
  if (has_labels) cloud.num_classes = *std::max_element(cloud.labels.begin(), cloud.labels.end()) + 1;
  cloud.validate();
  return cloud;
}

inline void write_cloud(const LabeledCloud& cloud, const std::string& path) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!out) throw IoError("cannot write " + path);

  out << "RSNPC 1 " << cloud.size() << ' ' << cloud.dims() << ' '
      << (cloud.has_labels() ? 1 : 0) << '\n';
  char buf[64];
  for (int i = 0; i < cloud.size(); ++i) {
    for (int j = 0; j < cloud.dims(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", cloud.points(i, j));
      if (j) out << ' ';
      out << buf;
    }
    if (cloud.has_labels()) out << ' ' << cloud.labels[i];
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace rsnet
