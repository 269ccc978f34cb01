#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "riesz/errors.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/quadrature.hpp"

namespace riesz {

// X -> -grad (g * m delta_{R^d})(X) in R^{d+k}.
using BackgroundField = std::function<XPoint(const XPoint&)>;

namespace detail {

// int_0^W (1 + w^2)^(-p) dw for p > 1/2
inline double power_arc(double w, double p) {
  if (w == 0.0) return 0.0;
  double b = p - 0.5;
  double x = w * w / (1.0 + w * w);
  double v = 0.5 * boost::math::beta(0.5, b, x);
  return w > 0.0 ? v : -v;
}

inline double g_vec(const KernelSpec& spec, double a, double b) { return g_radial(spec, std::hypot(a, b)); }

// Uniform density m on [lo, hi] in d = 1, k = 1.
inline XPoint bg_box_1d(const KernelSpec& spec, double m, double lo, double hi, const XPoint& X) {
  double x = X[0];
  double y = X[1];
  XPoint e{};
  if (y == 0.0) {
    if (x == lo || x == hi) return e;
    if (spec.is_log()) {
      e[0] = m * (std::log(std::abs(x - lo)) - std::log(std::abs(x - hi)));
    } else {
      e[0] = m * (std::pow(std::abs(x - hi), -spec.s) - std::pow(std::abs(x - lo), -spec.s));
    }
    return e;
  }
  e[0] = m * (g_vec(spec, x - hi, y) - g_vec(spec, x - lo, y));
  double ay = std::abs(y);
  double sgn = y > 0.0 ? 1.0 : -1.0;
  if (spec.is_log()) {
    e[1] = m * sgn * (std::atan((hi - x) / ay) - std::atan((lo - x) / ay));
  } else {
    double p = 0.5 * spec.s + 1.0;
    e[1] = m * spec.s * sgn * std::pow(ay, -spec.s) * (power_arc((hi - x) / ay, p) - power_arc((lo - x) / ay, p));
  }
  return e;
}

// Uniform density m on a rectangle for the 2D logarithmic kernel.
inline XPoint bg_box_log2d(double m, const Hyperrectangle& box, const XPoint& X) {
  auto F = [](double u1, double u2) {
    double r2 = u1 * u1 + u2 * u2;
    double t1 = (u2 == 0.0 || r2 == 0.0) ? 0.0 : 0.5 * u2 * std::log(r2);
    double t2 = u1 == 0.0 ? 0.0 : u1 * std::atan(u2 / u1);
    return t1 + t2;
  };
  auto comp = [&](int i, int j) {
    double A = X[i] - box.hi(i);
    double B = X[i] - box.lo(i);
    double C = X[j] - box.hi(j);
    double D = X[j] - box.lo(j);
    return F(B, D) - F(A, D) - F(B, C) + F(A, C);
  };
  XPoint e{};
  e[0] = m * comp(0, 1);
  e[1] = m * comp(1, 0);
  return e;
}

// Uniform density m on a rectangle for d = 2, k = 1 (Riesz); one direction analytic.
// int_lo^hi f, split at `at` when inside, geometric refinement toward `at`
// down to the length scale `scale`.
template <class F>
double graded_line_integral(F&& f, double lo, double hi, double at, double scale) {
  std::vector<quad::Node> nodes;
  auto piece = [&](double a, double b, double toward) {
    if (!(b > a)) return;
    double ratio = (b - a) / std::max(scale, 1e-12 * (b - a));
    int layers = std::clamp(static_cast<int>(std::ceil(std::log2(std::max(ratio, 1.0)))) + 2, 2, 60);
    quad::append_graded(nodes, a, b, toward, layers, 10);
  };
  if (at > lo && at < hi) {
    piece(lo, at, at);
    piece(at, hi, at);
  } else {
    piece(lo, hi, at <= lo ? lo : hi);
  }
  double v = 0.0;
  for (const auto& n : nodes) v += n.w * f(n.x);
  return v;
}

// int_0^T (c^2 + t^2)^(-s/2) dt, T >= 0.
inline double line_power(double c, double T, double s) {
  if (T <= 0.0) return 0.0;
  if (c == 0.0) return s < 1.0 ? std::pow(T, 1.0 - s) / (1.0 - s) : std::numeric_limits<double>::infinity();
  if (s == 1.0) return std::asinh(T / c);
  double u = T * T / (c * c + T * T);
  double a = 0.5;
  double b = 0.5 * (s - 1.0);
  double B = 0.0;
  if (b > 0.0) {
    B = boost::math::beta(a, b, u);
  } else {
    // continuation to b in (-1/2, 0): b B_u(a, b) = (a + b) B_u(a, b + 1) - u^a (1 - u)^b
    B = ((a + b) * boost::math::beta(a, b + 1.0, u) - std::sqrt(u) * std::pow(1.0 - u, b)) / b;
  }
  return 0.5 * std::pow(c, 1.0 - s) * B;
}

// Uniform density m on a rectangle, d = 2 Riesz kernel in R^3.
inline XPoint bg_box_2d_ext(const KernelSpec& spec, double m, const Hyperrectangle& box, const XPoint& X) {
  double s = spec.s;
  double y = X[2];
  double ay = std::abs(y);
  XPoint e{};
  for (int i = 0; i < 2; ++i) {
    int j = 1 - i;
    // signed segment integral over z_j in [lo_j, hi_j]
    auto seg = [&](double A) {
      double c = std::hypot(A, ay);
      double lo = X[j] - box.hi(j);
      double hi = X[j] - box.lo(j);
      double sl = lo < 0.0 ? -1.0 : 1.0;
      double sh = hi < 0.0 ? -1.0 : 1.0;
      return sh * line_power(c, std::abs(hi), s) - sl * line_power(c, std::abs(lo), s);
    };
    e[i] = m * (seg(X[i] - box.hi(i)) - seg(X[i] - box.lo(i)));
  }
  if (y != 0.0) {
    // s y int_rect (r^2 + y^2)^(-s/2-1): polar coordinates about each corner
    // with the radial integral done exactly.
    const quad::Rule& rule = quad::gauss_legendre(24);
    double y2 = y * y;
    double base = std::pow(ay, -s);
    auto radial = [&](double R) { return (base - std::pow(R * R + y2, -0.5 * s)) / s; };
    auto corner = [&](double a, double b) {
      if (a <= 0.0 || b <= 0.0) return 0.0;
      double split = std::atan2(b, a);
      double v = 0.0;
      double h1 = 0.5 * split;
      double h2 = 0.5 * (0.5 * std::numbers::pi - split);
      for (int q = 0; q < 24; ++q) {
        double t1 = h1 * (1.0 + rule.x[q]);
        double t2 = split + h2 * (1.0 + rule.x[q]);
        v += h1 * rule.w[q] * radial(a / std::cos(t1)) + h2 * rule.w[q] * radial(b / std::sin(t2));
      }
      return v;
    };
    double total = 0.0;
    for (int sx = 0; sx < 2; ++sx)
      for (int sz = 0; sz < 2; ++sz) {
        double a = sx ? box.hi(0) - X[0] : X[0] - box.lo(0);
        double b = sz ? box.hi(1) - X[1] : X[1] - box.lo(1);
        double sign = (a >= 0.0 ? 1.0 : -1.0) * (b >= 0.0 ? 1.0 : -1.0);
        total += sign * corner(std::abs(a), std::abs(b));
      }
    e[2] = m * s * total * y;
  }
  return e;
}

// Semicircle density of total mass M and radius R, 1D log kernel:
// field = (Re G, -Im G) with G(w) = int m(z) / (w - z) dz.
inline XPoint bg_semicircle_log(double M, double R, const XPoint& X) {
  double y = X[1];
  bool flip = y < 0.0;
  std::complex<double> w(X[0], flip ? -y : y);
  std::complex<double> root = std::sqrt(w - R) * std::sqrt(w + R);
  std::complex<double> G = M * 2.0 / (R * R) * (w - root);
  XPoint e{};
  e[0] = G.real();
  e[1] = -G.imag();
  if (flip) e[1] = -e[1];
  if (y == 0.0 && std::abs(X[0]) < R) {
    e[0] = M * 2.0 * X[0] / (R * R);
    e[1] = 0.0;
  }
  return e;
}

// Uniform ball, Coulomb kernels (k = 0).
inline XPoint bg_ball_coulomb(const KernelSpec& spec, double value, const std::vector<double>& c, double R, const XPoint& X) {
  int d = spec.d;
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) r2 += (X[i] - c[i]) * (X[i] - c[i]);
  double r = std::sqrt(r2);
  XPoint e{};
  if (r <= R) {
    double f = spec.csd * value / d;
    for (int i = 0; i < d; ++i) e[i] = f * (X[i] - c[i]);
  } else {
    double M = value * ball_volume(d, R);
    double f = M * spec.csd / sphere_area(d) / std::pow(r, d);
    for (int i = 0; i < d; ++i) e[i] = f * (X[i] - c[i]);
  }
  return e;
}

// Generic ray quadrature, directions paired (w, -w) so that the horizontal
// part is a convergent principal value on the plane.
inline XPoint bg_generic(const KernelSpec& spec, const DensityField& mu, const XPoint& X) {
  int d = spec.d;
  double y = spec.k == 1 ? X[d] : 0.0;
  XPoint e{};
  std::vector<double> xp(d), zp(d), zm(d);
  for (int i = 0; i < d; ++i) xp[i] = X[i];
  auto radial = [&](std::span<const double> w, double* out) {
    std::vector<double> cuts{0.0};
    std::vector<double> neg(d);
    for (int i = 0; i < d; ++i) neg[i] = -w[i];
    double top = 0.0;
    for (auto ch : {mu.support.chord(xp, w), mu.support.chord(xp, neg)}) {
      if (!ch) continue;
      cuts.push_back(ch->first);
      cuts.push_back(ch->second);
      top = std::max(top, ch->second);
    }
    if (top == 0.0) return;
    double ay = std::abs(y);
    if (ay > 0.0)
      for (double s = ay; s < top; s *= 4.0) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    for (int comp = 0; comp <= d; ++comp) {
      if (comp == d && spec.k == 0) break;
      auto f = [&](double rho) {
        if (rho <= 0.0) return 0.0;
        for (int i = 0; i < d; ++i) {
          zp[i] = xp[i] + rho * w[i];
          zm[i] = xp[i] - rho * w[i];
        }
        double mp = mu(zp);
        double mm = mu(zm);
        double r = std::hypot(rho, y);
        double gp = g_radial_derivative(spec, r);
        double jac = d == 1 ? 1.0 : rho;
        if (comp < d) return gp * rho / r * w[comp] * (mp - mm) * jac;
        return -gp * y / r * (mp + mm) * jac;
      };
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) acc += quad::integrate_endpoint_singular(f, cuts[i], cuts[i + 1], 1e-9);
      out[comp] += acc;
    }
  };
  if (d == 1) {
    double w[1] = {1.0};
    double out[2] = {0.0, 0.0};
    radial(w, out);
    e[0] = out[0];
    e[1] = out[1];
    return e;
  }
  if (d == 2) {
    std::vector<double> cuts{0.0, std::numbers::pi};
    Hyperrectangle bb = mu.support.bounding_box();
    for (int c = 0; c < 4; ++c) {
      double cx = (c & 1) ? bb.hi(0) : bb.lo(0);
      double cy = (c & 2) ? bb.hi(1) : bb.lo(1);
      double th = std::atan2(cy - X[1], cx - X[0]);
      if (th < 0.0) th += std::numbers::pi;
      if (th >= std::numbers::pi) th -= std::numbers::pi;
      cuts.push_back(th);
    }
    std::sort(cuts.begin(), cuts.end());
    for (int comp = 0; comp <= 2; ++comp) {
      if (comp == 2 && spec.k == 0) break;
      auto f = [&](double th) {
        double w[2] = {std::cos(th), std::sin(th)};
        double out[3] = {0.0, 0.0, 0.0};
        radial(w, out);
        return out[comp];
      };
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] - cuts[i] > 1e-14) acc += quad::integrate_adaptive(f, cuts[i], cuts[i + 1], 1e-8, 10);
      e[comp] = acc;
    }
    return e;
  }
  throw UnsupportedError("background field: no quadrature for this dimension");
}

}  // namespace detail

// Field of the neutralizing background, closed form where one is known.
inline BackgroundField make_background(const KernelSpec& spec, const std::optional<DensityField>& mu) {
  if (!mu) return [](const XPoint&) { return XPoint{}; };
  const DensityField& m = *mu;
  if (m.d != spec.d) throw DomainError("background density dimension does not match the kernel");
  using K = DensityField::Kind;
  if (m.kind == K::uniform_box) {
    Hyperrectangle box = m.support.box;
    double v = m.value;
    if (spec.d == 1) return [spec, v, box](const XPoint& X) { return detail::bg_box_1d(spec, v, box.lo(0), box.hi(0), X); };
    if (spec.kind == KernelKind::log2d) return [v, box](const XPoint& X) { return detail::bg_box_log2d(v, box, X); };
    if (spec.d == 2 && spec.k == 1)
      return [spec, v, box](const XPoint& X) { return detail::bg_box_2d_ext(spec, v, box, X); };
  }
  if (m.kind == K::uniform_ball) {
    if (spec.k == 0) {
      std::vector<double> c = m.support.center;
      double R = m.support.radius;
      double v = m.value;
      return [spec, v, c, R](const XPoint& X) { return detail::bg_ball_coulomb(spec, v, c, R, X); };
    }
    if (spec.d == 1) {
      double lo = m.support.center[0] - m.support.radius;
      double hi = m.support.center[0] + m.support.radius;
      double v = m.value;
      return [spec, v, lo, hi](const XPoint& X) { return detail::bg_box_1d(spec, v, lo, hi, X); };
    }
  }
  if (m.kind == K::semicircle && spec.kind == KernelKind::log1d) {
    double M = m.total_mass();
    double R = m.support.radius;
    double c = m.support.center[0];
    return [M, R, c](const XPoint& X) {
      XPoint Y = X;
      Y[0] -= c;
      return detail::bg_semicircle_log(M, R, Y);
    };
  }
  if (spec.d > 2) throw UnsupportedError("background field: only uniform balls are supported in d = 3");
  return [spec, m](const XPoint& X) { return detail::bg_generic(spec, m, X); };
}

}  // namespace riesz
