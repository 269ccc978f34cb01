#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "riesz/box.hpp"
#include "riesz/errors.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/quadrature.hpp"

namespace riesz {

// A positive density with known bounds lower <= rho <= upper.
struct BoundedDensity {
  std::function<double(std::span<const double>)> rho;
  double lower = 1.0;
  double upper = 1.0;

  static BoundedDensity from(const DensityField& m) { return {[m](std::span<const double> x) { return m(x); }, m.m_lower, m.m_upper}; }
  static BoundedDensity constant(double v) { return {[v](std::span<const double>) { return v; }, v, v}; }
};

// Tensor Gauss-Legendre integral of rho over a box (panels of width <= 4).
inline double box_mass(const BoundedDensity& rho, const Hyperrectangle& B, int order = 16) {
  int d = B.dim();
  std::vector<std::vector<quad::Node>> axes(d);
  for (int i = 0; i < d; ++i) {
    int panels = std::max(1, static_cast<int>(std::ceil(B.side(i) / 4.0)));
    for (int p = 0; p < panels; ++p) quad::append_gl(axes[i], B.lo(i) + B.side(i) * p / panels, B.lo(i) + B.side(i) * (p + 1) / panels, order);
  }
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      x[i] = axes[i][idx[i]].x;
      w *= axes[i][idx[i]].w;
    }
    total += w * rho.rho(x);
    int j = 0;
    while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
    if (j == d) break;
  }
  return total;
}

// Sidelength interval guaranteed for the cells of subdivide().
inline std::pair<double, double> subdivision_side_bounds(int d, double lower, double upper) {
  return {std::pow(2.0, -d) * std::pow(upper, -d) * std::pow(lower, d - 1), std::pow(2.0, d) * std::pow(lower, -d) * std::pow(upper, d - 1)};
}

namespace detail {

inline Hyperrectangle with_axis(const Hyperrectangle& B, int axis, double lo, double hi) {
  std::vector<double> l(B.dim()), h(B.dim());
  for (int i = 0; i < B.dim(); ++i) {
    l[i] = B.lo(i);
    h[i] = B.hi(i);
  }
  l[axis] = lo;
  h[axis] = hi;
  return Hyperrectangle::from_bounds(l, h);
}

// Position p along `axis` with mass(B restricted to [start, p]) = target
// (forward) or mass([p, start]) = target (backward).
inline double mass_cut(const BoundedDensity& rho, const Hyperrectangle& B, int axis, double start, double end, bool forward, double target) {
  auto f = [&](double p) {
    if (forward ? p <= start : p >= start) return -target;
    Hyperrectangle piece = forward ? with_axis(B, axis, start, p) : with_axis(B, axis, p, start);
    return box_mass(rho, piece) - target;
  };
  double a = forward ? start : end;
  double b = forward ? end : start;
  double fa = f(a);
  double fb = f(b);
  if (fa * fb > 0.0) throw GeometryError("subdivide: mass bracket failed (integer mass hypothesis)");
  std::uintmax_t iters = 200;
  boost::math::tools::eps_tolerance<double> tol(50);
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  return 0.5 * (r.first + r.second);
}

// Strips along axes[0] starting from `from_hi ? hi : lo`; each strip is then
// split recursively over the remaining axes with face at their low side.
inline void subdivide_rec(const BoundedDensity& rho, const Hyperrectangle& B, const std::vector<int>& axes, bool from_hi, long mass,
                          std::vector<Hyperrectangle>& out) {
  int a = axes[0];
  double lo = B.lo(a);
  double hi = B.hi(a);
  if (axes.size() == 1) {
    double pos = from_hi ? hi : lo;
    for (long i = 0; i + 1 < mass; ++i) {
      double next = mass_cut(rho, B, a, pos, from_hi ? lo : hi, !from_hi, 1.0);
      out.push_back(from_hi ? with_axis(B, a, next, pos) : with_axis(B, a, pos, next));
      pos = next;
    }
    out.push_back(from_hi ? with_axis(B, a, lo, pos) : with_axis(B, a, pos, hi));
    return;
  }
  long b = static_cast<long>(std::floor(static_cast<double>(mass) / B.side(a)));
  if (b < 1) throw GeometryError("subdivide: strip mass floor(mass / side) is zero; sidelength hypothesis violated");
  long strips = mass / b;  // strips - 1 of mass b, the last of mass in [b, 2b)
  std::vector<int> rest(axes.begin() + 1, axes.end());
  double pos = from_hi ? hi : lo;
  for (long i = 0; i + 1 < strips; ++i) {
    double next = mass_cut(rho, B, a, pos, from_hi ? lo : hi, !from_hi, static_cast<double>(b));
    Hyperrectangle strip = from_hi ? with_axis(B, a, next, pos) : with_axis(B, a, pos, next);
    subdivide_rec(rho, strip, rest, false, b, out);
    pos = next;
  }
  Hyperrectangle last = from_hi ? with_axis(B, a, lo, pos) : with_axis(B, a, pos, hi);
  subdivide_rec(rho, last, rest, false, mass - (strips - 1) * b, out);
}

}  // namespace detail

// Partition of H into int_H rho cells of unit rho-mass. `face` = 2 * axis + side
// (side 0: low face, 1: high face); cells touching that face share their
// thickness perpendicular to it. The last, thicker strip lies opposite the face.
inline std::vector<Hyperrectangle> subdivide(const Hyperrectangle& H, const BoundedDensity& rho, int face) {
  int d = H.dim();
  if (face < 0 || face >= 2 * d) throw GeometryError("subdivide: face index out of range");
  if (!(rho.lower > 0.0 && rho.lower <= rho.upper)) throw GeometryError("subdivide: need 0 < rho_lower <= rho_upper");
  for (int i = 0; i < d; ++i)
    if (H.side(i) < 2.0 / rho.lower - 1e-12) throw GeometryError("subdivide: every sidelength must be at least 2 / rho_lower");
  // density bounds on a sample lattice
  {
    const int m = 9;
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    while (true) {
      for (int i = 0; i < d; ++i) x[i] = H.lo(i) + H.side(i) * idx[i] / (m - 1);
      double v = rho.rho(x);
      if (v < rho.lower * (1.0 - 1e-12) || v > rho.upper * (1.0 + 1e-12))
        throw GeometryError("subdivide: density leaves [rho_lower, rho_upper]");
      int j = 0;
      while (j < d && ++idx[j] == m) idx[j++] = 0;
      if (j == d) break;
    }
  }
  double total = box_mass(rho, H);
  long mass = std::lround(total);
  if (mass < 1 || std::abs(total - mass) > 1e-9 * std::max(1.0, total)) throw GeometryError("subdivide: total mass must be a positive integer");
  int axis = face / 2;
  std::vector<int> axes{axis};
  for (int i = 0; i < d; ++i)
    if (i != axis) axes.push_back(i);
  std::vector<Hyperrectangle> out;
  out.reserve(mass);
  detail::subdivide_rec(rho, H, axes, face % 2 == 1, mass, out);
  return out;
}

struct SliceChoice {
  Hyperrectangle slice;
  double tau = 0.0;       // sidelength parameter of the chosen slice
  double selected = 0.0;  // profile value at tau
  double mean = 0.0;      // mean over the scan
  std::vector<double> taus;
  std::vector<double> values;
};

// Concentric sub-rectangle whose boundary carries the least energy. tau is
// scanned uniformly on [L - 2l, L - l) with L the smallest side; the slice is
// K shrunk by (L - tau) / 2 on every side.
inline SliceChoice good_boundary_slice(const std::function<double(double)>& profile, const Hyperrectangle& K, double l, int samples = 32) {
  double L = std::numeric_limits<double>::infinity();
  for (int i = 0; i < K.dim(); ++i) L = std::min(L, K.side(i));
  if (!(l > 0.0 && l <= L / 3.0)) throw DomainError("good_boundary_slice: need 0 < l <= L / 3");
  samples = std::max(samples, 32);
  SliceChoice out;
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    double tau = L - 2.0 * l + l * i / samples;
    double v = profile(tau);
    out.taus.push_back(tau);
    out.values.push_back(v);
    sum += v;
    if (v < best) {
      best = v;
      out.tau = tau;
    }
  }
  out.selected = best;
  out.mean = sum / samples;
  out.slice = K.shrunk(0.5 * (L - out.tau));
  return out;
}

struct VerticalChoice {
  double t_prime = 0.0;
  double selected = 0.0;
  double mean = 0.0;
};

// Height t' in [t/2, t] minimizing the slab energy profile(t').
inline VerticalChoice good_vertical_slice(const std::function<double(double)>& profile, double t, int k, int samples = 33) {
  if (k != 1) throw UnsupportedError("good_vertical_slice: no vertical direction when k = 0");
  if (!(t > 0.0)) throw DomainError("good_vertical_slice: t must be positive");
  samples = std::max(samples, 2);
  VerticalChoice out;
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    double tp = 0.5 * t + 0.5 * t * i / (samples - 1);
    double v = profile(tp);
    sum += v;
    if (v < best) {
      best = v;
      out.t_prime = tp;
    }
  }
  out.selected = best;
  out.mean = sum / samples;
  return out;
}

inline double min_separation(const Configuration& c) {
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.size(); ++i)
    for (int j = i + 1; j < c.size(); ++j) {
      double r2 = 0.0;
      for (int k = 0; k < c.d; ++k) r2 += (c.point(i)[k] - c.point(j)[k]) * (c.point(i)[k] - c.point(j)[k]);
      mn = std::min(mn, r2);
    }
  return std::sqrt(mn);
}

// Largest r1 for which a feasible concentric cube is guaranteed: points that
// can meet a face of K_{l+tau}, |tau| <= 1, have disjoint r0/2 balls inside a
// shell around the boundary, and each bans at most 4 d r1 of tau.
inline double crenel_r1_limit(int d, double ell, double r0, double r1_guess) {
  double grow = 1.0 + 2.0 * r1_guess + r0;
  double outer = std::pow(ell + grow, d);
  double inner = ell > grow ? std::pow(ell - grow, d) : 0.0;
  double count = (outer - inner) / ball_volume(d, 0.5 * r0);
  return 1.0 / (2.0 * d * count);
}

struct CrenelCube {
  Hyperrectangle cube;
  double tau = 0.0;
  double clearance = 0.0;  // min distance from the points to the boundary
};

inline double point_boundary_distance(const Hyperrectangle& K, std::span<const double> p) {
  return K.contains_closed(p) ? K.distance_to_boundary(p) : K.distance_to(p);
}

// Cube K_{l + tau} with the same center whose boundary stays r1 away from all
// points; tau scanned in steps <= r1 / 4 by increasing |tau|, positive first.
inline CrenelCube crenel_cube(const Configuration& points, const Hyperrectangle& K, double r1, double r0, bool check_condition = true) {
  int d = K.dim();
  double ell = K.side(0);
  for (int i = 1; i < d; ++i)
    if (std::abs(K.side(i) - ell) > 1e-12 * ell) throw GeometryError("crenel_cube: window must be a cube");
  if (!(r1 > 0.0)) throw DomainError("crenel_cube: r1 must be positive");
  if (check_condition) {
    if (!(r0 > 0.0)) throw DomainError("crenel_cube: r0 must be positive");
    double limit = crenel_r1_limit(d, ell, r0, r1);
    if (!(r1 < limit))
      throw GeometryError("crenel_cube: r1 = " + std::to_string(r1) + " violates the packing condition r1 < " + std::to_string(limit));
  }
  double step = r1 / 4.0;
  int steps = static_cast<int>(std::floor(1.0 / step));
  for (int j = 0; j <= steps; ++j) {
    for (int sgn : {1, -1}) {
      if (j == 0 && sgn < 0) continue;
      double tau = sgn * j * step;
      if (ell + tau <= 0.0) continue;
      Hyperrectangle C = Hyperrectangle::cube(K.center, ell + tau);
      double clear = std::numeric_limits<double>::infinity();
      for (int i = 0; i < points.size() && clear >= r1; ++i) clear = std::min(clear, point_boundary_distance(C, points.point(i)));
      if (clear >= r1) return {C, tau, clear};
    }
  }
  throw GeometryError("crenel_cube: no feasible tau in [-1, 1]; reduce r1");
}

// K_l with cubes K_{r0/2}(p) attached at every charge whose cube meets the boundary.
struct CrenelDomain {
  Hyperrectangle core;
  std::vector<Hyperrectangle> bumps;
  std::vector<int> bump_points;

  bool contains(std::span<const double> x) const {
    if (core.contains_closed(x)) return true;
    for (const auto& b : bumps)
      if (b.contains_closed(x)) return true;
    return false;
  }
};

inline CrenelDomain crenel_domain(const Configuration& points, const Hyperrectangle& K, double r0) {
  if (!(r0 > 0.0)) throw DomainError("crenel_domain: r0 must be positive");
  if (points.size() > 1 && min_separation(points) < r0 * (1.0 - 1e-12))
    throw GeometryError("crenel_domain: points are closer than r0");
  CrenelDomain out;
  out.core = K;
  int d = K.dim();
  double q = 0.25 * r0;
  for (int i = 0; i < points.size(); ++i) {
    auto p = points.point(i);
    bool touches = true;
    bool crosses = false;
    for (int k = 0; k < d; ++k) {
      double u = std::abs(p[k] - K.center[k]);
      if (u > K.half[k] + q) touches = false;
      if (u + q >= K.half[k]) crosses = true;
    }
    if (touches && crosses) {
      out.bumps.push_back(Hyperrectangle::cube(p, 0.5 * r0));
      out.bump_points.push_back(i);
    }
  }
  return out;
}

struct ScreeningRegime {
  int d = 2;
  int k = 0;
  double b = 0.75;
  double delta = 1.1;
  double theta = 0.5;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double L = 0.0;
  double gamma = 0.0;
  double c0 = 1.0;
};

struct RegimeCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RegimeReport {
  bool pass = true;
  std::vector<RegimeCheck> checks;
  double b_min = 0.0;
  double delta_max = 0.0;
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  double eps1_min = 0.0;
  double L_min = 0.0;
};

inline RegimeReport screening_regime_check(const ScreeningRegime& r) {
  RegimeReport rep;
  auto add = [&](std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
    rep.pass = rep.pass && ok;
  };
  double d = r.d;
  if (r.k == 0) {
    rep.b_min = d / (d + 2.0);
    rep.delta_max = 1.0 + (r.b * (d + 2.0) - d) / (d * (d + 2.0));
    rep.theta_lo = (r.delta * d - r.b) / (d + 1.0);
    rep.theta_hi = r.b + (1.0 - r.delta) * d;
    add("b", r.b > rep.b_min && r.b < 1.0, "b > d/(d+2) = " + std::to_string(rep.b_min));
    add("delta", r.delta > 1.0 && r.delta < rep.delta_max, "1 < delta < " + std::to_string(rep.delta_max));
    add("theta", r.theta >= rep.theta_lo && r.theta < rep.theta_hi,
        "theta in [" + std::to_string(rep.theta_lo) + ", " + std::to_string(rep.theta_hi) + ")");
  } else if (r.k == 1) {
    double g = r.gamma;
    if (!(g < 1.0)) throw DomainError("screening_regime_check: gamma must be below 1");
    rep.eps1_min = 10.0 * std::pow(r.eps2, 0.25);
    rep.L_min = std::pow(r.c0, -2.0 / (1.0 - g)) * std::pow(r.eps2, -(d - g + 1.0) / (2.0 * (1.0 - g)));
    add("eps1", r.eps1 >= rep.eps1_min, "eps1 >= 10 eps2^(1/4) = " + std::to_string(rep.eps1_min));
    add("L", r.L >= rep.L_min, "L >= " + std::to_string(rep.L_min));
  } else {
    throw DomainError("screening_regime_check: k must be 0 or 1");
  }
  return rep;
}

}  // namespace riesz
