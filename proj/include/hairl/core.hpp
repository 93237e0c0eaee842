// Core numeric types: dense row-major tensors, error taxonomy, and the
// seeded random generator threaded through every stochastic operation.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hairl {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != static_cast<int>(data.size()))
      throw DimensionError("tensor shape/data size mismatch");
  }

  static int numel_of(const std::vector<int>& s) {
    int n = 1;
    for (int d : s) {
      if (d < 0) throw DimensionError("negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    int n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor vec(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int numel() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int rows() const {
    if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-d");
    return shape[0];
  }
  int cols() const {
    if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-d");
    return shape[1];
  }
  int size() const {
    if (ndim() != 1) throw DimensionError("size(): tensor is not 1-d");
    return shape[0];
  }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols() + j];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline Tensor one_hot(int n, int i) {
  if (i < 0 || i >= n) throw ArgumentError("one_hot index out of range");
  Tensor t = Tensor::zeros({n});
  t.at(i) = 1.0;
  return t;
}

// Deterministic generator. All distributions are implemented by hand on top
// of splitmix64 so that streams are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // avoid the all-zero fixed point and decorrelate small seeds
    next();
    next();
  }

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {
    if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
    return static_cast<int>(next() % static_cast<uint64_t>(n));
  }

  // standard normal via Box-Muller; second value cached
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.141592653589793 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // CDF inversion; probabilities need not be exactly normalized
  int categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw ArgumentError("categorical: empty distribution");
    double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  // independent child stream, stable under parent usage order
  Rng spawn(uint64_t stream) const {
    return Rng(state_ ^ (0x9e3779b97f4a7c15ULL + stream * 0xda942042e4dd58b5ULL));
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hairl
