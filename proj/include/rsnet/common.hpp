#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsnet {

// Row-major matrices throughout: row i = features of point/slice i.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matd = Mat<double>;
using Matf = Mat<float>;

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct EmptySceneError : Error { using Error::Error; };
struct EmptyCubeError : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct VersionError : Error { using Error::Error; };

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// mt19937_64 plus hand-rolled output transforms so that every stochastic
// choice in the repository is a pure function of the seed, independent of
// the standard library's distribution internals.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives independent stream seeds, e.g. per (epoch, scene, cube).
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x9e3779b97f4a7c15ull));
}
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Index in [0, n). Modulo bias is ~2^-53 at desk scale.
  size_t below(size_t n) { return size_t(eng_() % n); }

  // Box-Muller, no cached spare.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  // Gaussian clamped at +-3 sigma. Bounded support keeps generated scenes
  // inside their stated guard bands.
  double normal_clamped3(double mean, double stddev) {
    double z = normal(0.0, 1.0);
    if (z > 3.0) z = 3.0;
    if (z < -3.0) z = -3.0;
    return mean + stddev * z;
  }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = size_t(last - first);
    for (size_t i = n; i > 1; --i) {
      size_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rsnet
