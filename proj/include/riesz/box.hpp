#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "riesz/errors.hpp"

namespace riesz {

// Axis-aligned box in R^d stored as center + half side lengths. The cube
// K_l(a) is Hyperrectangle::cube(a, l), i.e. [a - l/2, a + l/2]^d.
struct Hyperrectangle {
  std::vector<double> center;
  std::vector<double> half;

  Hyperrectangle() = default;
  Hyperrectangle(std::vector<double> c, std::vector<double> h) : center(std::move(c)), half(std::move(h)) {
    if (center.size() != half.size() || center.empty())
      throw DomainError("Hyperrectangle: center / half-length dimension mismatch");
    for (double v : half)
      if (!(v > 0.0)) throw DomainError("Hyperrectangle: half lengths must be positive");
  }

  static Hyperrectangle cube(std::span<const double> c, double side) {
    return {std::vector<double>(c.begin(), c.end()), std::vector<double>(c.size(), 0.5 * side)};
  }
  static Hyperrectangle from_bounds(std::span<const double> lo, std::span<const double> hi) {
    std::vector<double> c(lo.size());
    std::vector<double> h(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      c[i] = 0.5 * (lo[i] + hi[i]);
      h[i] = 0.5 * (hi[i] - lo[i]);
    }
    return {std::move(c), std::move(h)};
  }

  int dim() const { return static_cast<int>(center.size()); }
  double lo(int i) const { return center[i] - half[i]; }
  double hi(int i) const { return center[i] + half[i]; }
  double side(int i) const { return 2.0 * half[i]; }

  double volume() const {
    double v = 1.0;
    for (double h : half) v *= 2.0 * h;
    return v;
  }

  bool contains_closed(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo(i) || x[i] > hi(i)) return false;
    return true;
  }

  // Half-open [lo, hi) convention used for point counting.
  bool contains_half_open(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo(i) || x[i] >= hi(i)) return false;
    return true;
  }

  bool contains(const Hyperrectangle& other, double tol = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (other.lo(i) < lo(i) - tol || other.hi(i) > hi(i) + tol) return false;
    return true;
  }

  // Euclidean distance from x to the box (0 inside).
  double distance_to(std::span<const double> x) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      double e = std::max({lo(i) - x[i], 0.0, x[i] - hi(i)});
      s += e * e;
    }
    return std::sqrt(s);
  }

  // Euclidean distance from x to the boundary surface.
  double distance_to_boundary(std::span<const double> x) const {
    if (!contains_closed(x)) return distance_to(x);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < half.size(); ++i) m = std::min(m, half[i] - std::abs(x[i] - center[i]));
    return m;
  }

  Hyperrectangle shrunk(double by) const {
    std::vector<double> h = half;
    for (double& v : h) v -= by;
    return {center, std::move(h)};
  }

  // tol absorbs the roundoff of the center / half-length storage
  bool interior_disjoint(const Hyperrectangle& o, double tol = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (hi(i) <= o.lo(i) + tol || o.hi(i) <= lo(i) + tol) return true;
    return false;
  }
};

}  // namespace riesz
