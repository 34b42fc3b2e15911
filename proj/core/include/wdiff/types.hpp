#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace wdiff {

/// Largest supported ambient dimension. Vectors and matrices are stored
/// inline up to this size, so hot loops never touch the heap.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;
using MatrixFn = std::function<Mat(const Vec&)>;

/// Open Euclidean ball {y : |y - center| < radius}.
struct Ball {
  Vec center;
  double radius = 1.0;

  Ball() = default;
  Ball(Vec c, double r) : center(std::move(c)), radius(r) {
    if (!(r > 0.0)) throw std::invalid_argument("Ball: radius must be positive");
  }
  int dim() const { return static_cast<int>(center.size()); }
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Box: dimension mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(hi[i] > lo[i])) throw std::invalid_argument("Box: hi must exceed lo");
  }
  static Box cube(const Vec& center, double half_side) {
    return Box(center.array() - half_side, center.array() + half_side);
  }
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

/// Scalar field with an optional analytic gradient.
struct ScalarField {
  ScalarFn value;
  std::optional<VectorFn> gradient;
  std::string name = "custom";

  double operator()(const Vec& x) const { return value(x); }
};

/// Closed interval [lo, hi]; hi may be +inf.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    const bool above = lo_open ? v > lo : v >= lo;
    const bool below = hi_open ? v < hi : v <= hi;
    return above && below;
  }
  double width() const { return hi - lo; }
};

inline Vec zeros(int d) { return Vec::Zero(d); }

inline Vec unit(int d, int i) {
  Vec e = Vec::Zero(d);
  e[i] = 1.0;
  return e;
}

}  // namespace wdiff
