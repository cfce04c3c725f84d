#pragma once

// Hand-rolled random generators for property tests. They use the standard
// library engine, not the library's counter streams, so test inputs are
// independent of the code under test.

#include "sgdlab/types.hpp"

#include <random>

namespace gen {

using sgdlab::Index;
using sgdlab::Matrix;
using sgdlab::Vector;

class Source {
 public:
  explicit Source(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>()(engine_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine_); }

  Vector gaussian(Index d) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) {
      v(i) = normal();
    }
    return v;
  }
  Vector unit(Index d) { return gaussian(d).normalized(); }
  Vector box(Index d, double lo, double hi) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) {
      v(i) = uniform(lo, hi);
    }
    return v;
  }
  /// Unit tangent vector at unit w.
  Vector tangent(const Vector& w) {
    Vector v = gaussian(w.size());
    v -= w.dot(v) * w;
    return v.normalized();
  }
  Matrix symmetric(Index d) {
    const Matrix b = Eigen::Map<const Matrix>(gaussian(d * d).data(), d, d);
    return 0.5 * (b + b.transpose());
  }
  /// Probability vector with entries bounded away from zero.
  Vector weights(Index k) {
    Vector w = box(k, 0.2, 1.0);
    return w / w.sum();
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gen
