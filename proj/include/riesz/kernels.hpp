#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "riesz/box.hpp"
#include "riesz/errors.hpp"
#include "riesz/quadrature.hpp"

namespace riesz {

enum class KernelKind { riesz, log1d, log2d };

// Points of the extended space R^{d+k}; the first d entries are the
// horizontal coordinates, entry d holds y when k = 1.
inline constexpr int kMaxExtDim = 4;
using XPoint = std::array<double, kMaxExtDim>;

inline double sphere_area(int dim_ambient) {
  // |S^{m-1}| for the unit sphere in R^m
  double m = dim_ambient;
  return 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
}

inline double ball_volume(int d, double r) { return sphere_area(d) / d * std::pow(r, d); }

struct KernelSpec {
  KernelKind kind = KernelKind::riesz;
  double s = 0.0;  // 0 for the log kinds
  int d = 1;
  int k = 1;
  double gamma = 0.0;
  double csd = 0.0;

  int ext_dim() const { return d + k; }
  bool is_log() const { return kind != KernelKind::riesz; }
  bool is_coulomb() const { return k == 0; }
  std::string name() const {
    switch (kind) {
      case KernelKind::log1d: return "log1d";
      case KernelKind::log2d: return "log2d";
      default: return "riesz";
    }
  }

  static KernelSpec riesz(int d, double s);
  static KernelSpec log1d();
  static KernelSpec log2d();
};

double csd_constant(const KernelSpec& spec);

namespace detail {

inline void finish_spec(KernelSpec& spec) {
  spec.gamma = spec.s - spec.d + 2 - spec.k;
  if (!(spec.gamma > -1.0 && spec.gamma < 1.0))
    throw DomainError("kernel spec: gamma outside (-1, 1)");
  spec.csd = csd_constant(spec);
}

}  // namespace detail

inline KernelSpec KernelSpec::riesz(int d, double s) {
  if (d < 1 || d > 3) throw UnsupportedError("riesz kernel: dimension must be 1, 2 or 3");
  double smin = std::max(0.0, d - 2.0);
  if (!(s >= smin && s < d)) throw DomainError("riesz kernel: need max(0, d-2) <= s < d");
  if (s <= 0.0) throw DomainError("riesz kernel: s = 0 is the logarithmic case, use log1d/log2d");
  KernelSpec spec;
  spec.kind = KernelKind::riesz;
  spec.d = d;
  spec.s = s;
  spec.k = (d >= 3 && s == d - 2.0) ? 0 : 1;
  detail::finish_spec(spec);
  return spec;
}

inline KernelSpec KernelSpec::log1d() {
  KernelSpec spec;
  spec.kind = KernelKind::log1d;
  spec.d = 1;
  spec.k = 1;
  detail::finish_spec(spec);
  return spec;
}

inline KernelSpec KernelSpec::log2d() {
  KernelSpec spec;
  spec.kind = KernelKind::log2d;
  spec.d = 2;
  spec.k = 0;
  detail::finish_spec(spec);
  return spec;
}

// Radial profile of the kernel and its derivative.
inline double g_radial(const KernelSpec& spec, double r) {
  return spec.is_log() ? -std::log(r) : std::pow(r, -spec.s);
}

inline double g_radial_derivative(const KernelSpec& spec, double r) {
  return spec.is_log() ? -1.0 / r : -spec.s * std::pow(r, -spec.s - 1.0);
}

inline double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double g_eval(const KernelSpec& spec, std::span<const double> x) {
  double r = norm(x);
  if (r == 0.0) throw DomainError("g_eval: kernel is singular at the origin");
  return g_radial(spec, r);
}

inline void check_eta(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("truncation radius eta must lie in (0, 1)");
}

// g_eta = min(g, g(eta)); finite at the origin.
inline double g_trunc(const KernelSpec& spec, std::span<const double> x, double eta) {
  check_eta(eta);
  double r = norm(x);
  return r <= eta ? g_radial(spec, eta) : g_radial(spec, r);
}

// f_eta = (g - g(eta))_+, +infinity at the origin.
inline double f_eta(const KernelSpec& spec, std::span<const double> x, double eta) {
  check_eta(eta);
  double r = norm(x);
  if (r == 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, g_radial(spec, r) - g_radial(spec, eta));
}

// Gradient of g at z (dim entries used), z != 0.
inline XPoint grad_g(const KernelSpec& spec, const XPoint& z, int dim) {
  double r2 = 0.0;
  for (int i = 0; i < dim; ++i) r2 += z[i] * z[i];
  double f;
  if (spec.is_log()) {
    f = -1.0 / r2;
  } else {
    f = -spec.s * std::pow(r2, -0.5 * spec.s - 1.0);
  }
  XPoint out{};
  for (int i = 0; i < dim; ++i) out[i] = f * z[i];
  return out;
}

// Integral over [0, pi/2] of cos^gamma(phi) sin^(d-1)(phi) F(sin phi) dphi for
// F smooth between the given breakpoints (values of sin phi). Near phi = 0 the
// variable phi is used; near pi/2 the variable u = cos^(1+gamma)/(1+gamma)
// absorbs the cos^gamma factor.
template <class F>
double polar_weighted_integral(double gamma, int d, F&& fn, std::vector<double> sin_cuts = {}) {
  double a = 1.0 + gamma;
  const double split = std::numbers::pi / 4;
  std::vector<double> phis{0.0, split};
  std::vector<double> us{0.0, std::pow(std::cos(split), a) / a};
  for (double sc : sin_cuts) {
    if (!(sc > 0.0 && sc < 1.0)) continue;
    double phi = std::asin(sc);
    if (phi < split)
      phis.push_back(phi);
    else if (phi > split)
      us.push_back(std::pow(std::cos(phi), a) / a);
  }
  std::sort(phis.begin(), phis.end());
  std::sort(us.begin(), us.end());
  auto near_axis = [&](double phi) {
    double sn = std::sin(phi);
    return std::pow(std::cos(phi), gamma) * (d == 1 ? 1.0 : std::pow(sn, d - 1)) * fn(sn);
  };
  auto near_plane = [&](double u) {
    double c = std::min(1.0, std::pow(a * u, 1.0 / a));
    double sn = std::sqrt(std::max(0.0, (1.0 - c) * (1.0 + c)));
    return (d == 2 ? 1.0 : std::pow(sn, d - 2)) * fn(sn);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < phis.size(); ++i)
    if (phis[i + 1] - phis[i] > 1e-15) total += quad::integrate_endpoint_singular(near_axis, phis[i], phis[i + 1], 1e-13);
  for (std::size_t i = 0; i + 1 < us.size(); ++i)
    if (us[i + 1] - us[i] > 1e-15) total += quad::integrate_endpoint_singular(near_plane, us[i], us[i + 1], 1e-13);
  return total;
}

inline double weighted_polar_integral(double gamma, int d) {
  return polar_weighted_integral(gamma, d, [](double) { return 1.0; });
}

// Total |y|^gamma-weighted area of the unit sphere of R^{d+k}.
inline double weighted_sphere_area(const KernelSpec& spec) {
  if (spec.k == 0) return sphere_area(spec.d);
  // y = cos(phi), horizontal part sin(phi) * theta with theta in S^{d-1}
  return sphere_area(spec.d) * 2.0 * weighted_polar_integral(spec.gamma, spec.d);
}

// Constant in -div(|y|^gamma grad g) = c_{s,d} delta_0, obtained as the
// outward flux of -|y|^gamma grad g through the unit sphere.
inline double csd_constant(const KernelSpec& spec) {
  double slope = spec.is_log() ? 1.0 : spec.s;  // -g'(1)
  return slope * weighted_sphere_area(spec);
}

namespace detail {

// Radii at which the fraction of a sphere (centred at p) inside the box
// stops being smooth: every combination of per-axis face distances.
inline void critical_radii(std::span<const double> p, std::span<const double> lo, std::span<const double> hi,
                           std::vector<double>& out) {
  int m = static_cast<int>(p.size());
  int combos = 1;
  for (int i = 0; i < m; ++i) combos *= 3;
  for (int c = 1; c < combos; ++c) {
    int code = c;
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      int pick = code % 3;
      code /= 3;
      if (pick == 1) s += (p[i] - lo[i]) * (p[i] - lo[i]);
      if (pick == 2) s += (p[i] - hi[i]) * (p[i] - hi[i]);
    }
    out.push_back(std::sqrt(s));
  }
}

inline double box_distance(std::span<const double> p, std::span<const double> lo, std::span<const double> hi) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double e = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
    s += e * e;
  }
  return std::sqrt(s);
}

inline double inner_clearance(std::span<const double> p, std::span<const double> lo, std::span<const double> hi) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < lo[i] || p[i] > hi[i]) return -1.0;
    m = std::min({m, p[i] - lo[i], hi[i] - p[i]});
  }
  return m;
}

// Fraction of the uniform measure on the sphere of radius rho about p that
// lies in the box [lo, hi].
inline double sphere_fraction(std::span<const double> p, std::span<const double> lo, std::span<const double> hi,
                              double rho) {
  int m = static_cast<int>(p.size());
  if (box_distance(p, lo, hi) >= rho) return rho == 0.0 && box_distance(p, lo, hi) == 0.0 ? 1.0 : 0.0;
  if (inner_clearance(p, lo, hi) >= rho) return 1.0;
  if (m == 1) {
    auto in = [&](double x) { return (x >= lo[0] && x <= hi[0]) ? 1.0 : 0.0; };
    return 0.5 * (in(p[0] + rho) + in(p[0] - rho));
  }
  // polar angle alpha measured from axis 0, density sin^(m-2) alpha
  std::vector<double> cuts{0.0, std::numbers::pi};
  for (double face : {lo[0], hi[0]}) {
    double c = (face - p[0]) / rho;
    if (c > -1.0 && c < 1.0) cuts.push_back(std::acos(c));
  }
  std::vector<double> radii;
  critical_radii(p.subspan(1), lo.subspan(1), hi.subspan(1), radii);
  for (double r : radii) {
    if (r > 0.0 && r < rho) {
      double a = std::asin(r / rho);
      cuts.push_back(a);
      cuts.push_back(std::numbers::pi - a);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  auto integrand = [&](double alpha) {
    double x0 = p[0] + rho * std::cos(alpha);
    if (x0 < lo[0] || x0 > hi[0]) return 0.0;
    double w = m == 2 ? 1.0 : std::pow(std::sin(alpha), m - 2);
    return w * sphere_fraction(p.subspan(1), lo.subspan(1), hi.subspan(1), rho * std::sin(alpha));
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i];
    double b = cuts[i + 1];
    if (b - a < 1e-15) continue;
    if (m == 2) {
      // integrand is piecewise constant in alpha
      total += (b - a) * integrand(0.5 * (a + b));
    } else {
      total += quad::integrate_endpoint_singular(integrand, a, b, 1e-11);
    }
  }
  double norm_m = m == 2 ? std::numbers::pi : std::beta(0.5, 0.5 * (m - 1));
  return std::clamp(total / norm_m, 0.0, 1.0);
}

}  // namespace detail

// Mass of the smeared charge delta_p^(eta) carried by K x R^k.
inline double smeared_mass_in_window(const KernelSpec& spec, std::span<const double> p, double eta,
                                     const Hyperrectangle& window) {
  check_eta(eta);
  int d = spec.d;
  if (static_cast<int>(p.size()) != d || window.dim() != d) throw DomainError("smeared_mass_in_window: dimension mismatch");
  std::vector<double> lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo[i] = window.lo(i);
    hi[i] = window.hi(i);
  }
  if (detail::box_distance(p, lo, hi) > eta) return 0.0;
  if (detail::inner_clearance(p, lo, hi) > eta) return 1.0;
  if (spec.k == 0) return detail::sphere_fraction(p, lo, hi, eta);

  // k = 1: y = eta cos(phi) with weight |cos phi|^gamma sin^(d-1) phi, symmetric in y
  std::vector<double> radii;
  detail::critical_radii(p, lo, hi, radii);
  for (double& r : radii) r /= eta;
  double total = polar_weighted_integral(
      spec.gamma, d, [&](double sn) { return detail::sphere_fraction(p, lo, hi, eta * sn); }, radii);
  double norm_w = 0.5 * std::beta(0.5 * (spec.gamma + 1.0), 0.5 * d);
  return std::clamp(total / norm_w, 0.0, 1.0);
}

}  // namespace riesz
