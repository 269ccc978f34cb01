#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riesz/box.hpp"
#include "riesz/errors.hpp"
#include "riesz/kernels.hpp"
#include "riesz/quadrature.hpp"

namespace riesz {

using PointFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

// Confining potential. The catalogue entry is V(x) = a|x|^2 + shift.
struct Potential {
  enum class Kind { quadratic, custom } kind = Kind::quadratic;
  double a = 1.0;
  double shift = 0.0;
  PointFn value_fn;
  GradFn grad_fn;

  static Potential quadratic(double a, double shift = 0.0) {
    if (!(a > 0.0)) throw DomainError("quadratic potential needs a > 0");
    Potential v;
    v.a = a;
    v.shift = shift;
    return v;
  }
  static Potential custom(PointFn value, GradFn grad) {
    Potential v;
    v.kind = Kind::custom;
    v.value_fn = std::move(value);
    v.grad_fn = std::move(grad);
    return v;
  }

  bool is_quadratic() const { return kind == Kind::quadratic; }

  double operator()(std::span<const double> x) const {
    if (kind == Kind::custom) return value_fn(x);
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return a * r2 + shift;
  }

  void gradient(std::span<const double> x, std::span<double> out) const {
    if (kind == Kind::custom) {
      if (!grad_fn) throw DomainError("custom potential has no gradient");
      grad_fn(x, out);
      return;
    }
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * a * x[i];
  }
};

struct GasModel {
  KernelSpec kernel;
  Potential potential;
  int n = 1;

  int d() const { return kernel.d; }
};

// n labelled points of R^d, stored row-major.
struct Configuration {
  enum class Scale { macroscopic, blown_up };
  int d = 1;
  std::vector<double> coords;
  Scale scale = Scale::macroscopic;

  Configuration() = default;
  Configuration(int dim, std::vector<double> c, Scale sc = Scale::macroscopic) : d(dim), coords(std::move(c)), scale(sc) {
    if (dim < 1 || coords.size() % dim != 0) throw DomainError("Configuration: coordinate count not a multiple of d");
  }

  int size() const { return static_cast<int>(coords.size()) / d; }
  std::span<const double> point(int i) const { return {coords.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)}; }
  std::span<double> point(int i) { return {coords.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)}; }
};

// Support of a density: a ball or an axis-aligned box.
struct Support {
  enum class Shape { ball, box } shape = Shape::ball;
  std::vector<double> center;
  double radius = 0.0;
  Hyperrectangle box;

  static Support ball(std::vector<double> c, double r) {
    Support s;
    s.center = std::move(c);
    s.radius = r;
    return s;
  }
  static Support from_box(Hyperrectangle b) {
    Support s;
    s.shape = Shape::box;
    s.center = b.center;
    s.box = std::move(b);
    return s;
  }

  int dim() const { return static_cast<int>(center.size()); }

  // Signed distance to the boundary, positive inside.
  double interior_margin(std::span<const double> x) const {
    if (shape == Shape::box) {
      return box.contains_closed(x) ? box.distance_to_boundary(x) : -box.distance_to(x);
    }
    double r2 = 0.0;
    for (int i = 0; i < dim(); ++i) r2 += (x[i] - center[i]) * (x[i] - center[i]);
    return radius - std::sqrt(r2);
  }

  bool contains(std::span<const double> x, double tol = 0.0) const { return interior_margin(x) >= -tol; }

  // K inside the support with at least `margin` clearance.
  bool contains_box(const Hyperrectangle& k, double margin = 0.0) const {
    if (shape == Shape::box) {
      for (int i = 0; i < dim(); ++i)
        if (k.lo(i) < box.lo(i) + margin || k.hi(i) > box.hi(i) - margin) return false;
      return true;
    }
    double far2 = 0.0;
    for (int i = 0; i < dim(); ++i) {
      double e = std::max(std::abs(k.lo(i) - center[i]), std::abs(k.hi(i) - center[i]));
      far2 += e * e;
    }
    return std::sqrt(far2) <= radius - margin;
  }

  Hyperrectangle bounding_box() const {
    if (shape == Shape::box) return box;
    return {center, std::vector<double>(center.size(), radius)};
  }

  double volume() const { return shape == Shape::box ? box.volume() : ball_volume(dim(), radius); }

  Support scaled(double lam) const {
    if (shape == Shape::box) {
      std::vector<double> c = box.center;
      std::vector<double> h = box.half;
      for (double& v : c) v *= lam;
      for (double& v : h) v *= lam;
      return from_box({std::move(c), std::move(h)});
    }
    std::vector<double> c = center;
    for (double& v : c) v *= lam;
    return ball(std::move(c), radius * lam);
  }

  // Parameter interval [r0, r1] of the ray x + r w (r >= 0) inside the support.
  std::optional<std::pair<double, double>> chord(std::span<const double> x, std::span<const double> w) const {
    int d = dim();
    if (shape == Shape::ball) {
      double b = 0.0;
      double c = -radius * radius;
      for (int i = 0; i < d; ++i) {
        double dx = x[i] - center[i];
        b += dx * w[i];
        c += dx * dx;
      }
      double disc = b * b - c;
      if (disc <= 0.0) return std::nullopt;
      double sq = std::sqrt(disc);
      double r0 = std::max(0.0, -b - sq);
      double r1 = -b + sq;
      if (r1 <= r0) return std::nullopt;
      return std::make_pair(r0, r1);
    }
    double r0 = 0.0;
    double r1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      if (w[i] == 0.0) {
        if (x[i] < box.lo(i) || x[i] > box.hi(i)) return std::nullopt;
        continue;
      }
      double ta = (box.lo(i) - x[i]) / w[i];
      double tb = (box.hi(i) - x[i]) / w[i];
      if (ta > tb) std::swap(ta, tb);
      r0 = std::max(r0, ta);
      r1 = std::min(r1, tb);
    }
    if (r1 <= r0) return std::nullopt;
    return std::make_pair(r0, r1);
  }
};

namespace detail {

// Volume of ball(c, R) intersected with the box [lo, hi].
inline double ball_box_volume(std::span<const double> c, double R, std::span<const double> lo, std::span<const double> hi) {
  int m = static_cast<int>(c.size());
  if (R <= 0.0) return 0.0;
  if (m == 1) return std::max(0.0, std::min(hi[0], c[0] + R) - std::max(lo[0], c[0] - R));
  double a = std::max(lo[0], c[0] - R);
  double b = std::min(hi[0], c[0] + R);
  if (b <= a) return 0.0;
  std::vector<double> cuts{a, b};
  std::vector<double> radii;
  critical_radii(c.subspan(1), lo.subspan(1), hi.subspan(1), radii);
  for (double r : radii) {
    if (r > 0.0 && r < R) {
      double off = std::sqrt(R * R - r * r);
      for (double x : {c[0] - off, c[0] + off})
        if (x > a && x < b) cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](double x) {
    double rr = R * R - (x - c[0]) * (x - c[0]);
    return rr <= 0.0 ? 0.0 : ball_box_volume(c.subspan(1), std::sqrt(rr), lo.subspan(1), hi.subspan(1));
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) total += quad::integrate_endpoint_singular(f, cuts[i], cuts[i + 1], 1e-12);
  return total;
}

}  // namespace detail

// Equilibrium density m_V (scale 1) or its blow-up m'_V (scale n^{1/d}).
struct DensityField {
  enum class Kind { semicircle, uniform_ball, uniform_box, custom } kind = Kind::uniform_ball;
  int d = 1;
  Support support;             // at the current scale
  double radius = 0.0;         // macroscopic radius for semicircle / uniform_ball
  double value = 0.0;          // constant density for the uniform kinds
  PointFn custom_fn;           // macroscopic density for custom
  double holder_alpha = 1.0;
  double holder_norm = 0.0;
  double m_lower = 0.0;
  double m_upper = 0.0;
  double blowup_scale = 1.0;

  std::string id() const {
    switch (kind) {
      case Kind::semicircle: return "semicircle";
      case Kind::uniform_ball: return "uniform-ball";
      case Kind::uniform_box: return "uniform-box";
      default: return "custom";
    }
  }
  bool is_uniform() const { return kind == Kind::uniform_ball || kind == Kind::uniform_box; }

  double operator()(std::span<const double> x) const {
    if (!support.contains(x)) return 0.0;
    switch (kind) {
      case Kind::semicircle: {
        double u = x[0] / blowup_scale;
        double r2 = radius * radius - u * u;
        return r2 <= 0.0 ? 0.0 : 2.0 / (std::numbers::pi * radius * radius) * std::sqrt(r2);
      }
      case Kind::uniform_ball:
      case Kind::uniform_box: return value;
      default: {
        std::vector<double> u(x.begin(), x.end());
        for (double& v : u) v /= blowup_scale;
        return custom_fn(u);
      }
    }
  }

  // Integral of the density over the box K.
  double mass_in(const Hyperrectangle& k) const {
    std::vector<double> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = k.lo(i);
      hi[i] = k.hi(i);
    }
    switch (kind) {
      case Kind::semicircle: {
        double R = radius * blowup_scale;
        auto cdf = [&](double x) {
          double t = std::clamp(x / R, -1.0, 1.0);
          return 0.5 + (t * std::sqrt(1.0 - t * t) + std::asin(t)) / std::numbers::pi;
        };
        return std::pow(blowup_scale, d) * (cdf(hi[0]) - cdf(lo[0]));
      }
      case Kind::uniform_box: {
        double v = value;
        for (int i = 0; i < d; ++i) v *= std::max(0.0, std::min(hi[i], support.box.hi(i)) - std::max(lo[i], support.box.lo(i)));
        return v;
      }
      case Kind::uniform_ball: {
        if (support.contains_box(k)) return value * k.volume();
        return value * detail::ball_box_volume(support.center, support.radius, lo, hi);
      }
      default: {
        Hyperrectangle bb = support.bounding_box();
        for (int i = 0; i < d; ++i) {
          lo[i] = std::max(lo[i], bb.lo(i));
          hi[i] = std::min(hi[i], bb.hi(i));
          if (hi[i] <= lo[i]) return 0.0;
        }
        const int order = 16;
        const int panels = d == 3 ? 6 : 16;
        std::vector<quad::Node> nodes;
        std::vector<std::vector<quad::Node>> axes(d);
        for (int i = 0; i < d; ++i) {
          double h = (hi[i] - lo[i]) / panels;
          for (int p = 0; p < panels; ++p) quad::append_gl(axes[i], lo[i] + p * h, lo[i] + (p + 1) * h, order);
        }
        std::vector<double> x(d);
        std::vector<std::size_t> idx(d, 0);
        double total = 0.0;
        while (true) {
          double w = 1.0;
          for (int i = 0; i < d; ++i) {
            x[i] = axes[i][idx[i]].x;
            w *= axes[i][idx[i]].w;
          }
          total += w * (*this)(x);
          int j = 0;
          while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
          if (j == d) break;
        }
        return total;
      }
    }
  }

  double total_mass() const {
    if (kind == Kind::uniform_ball || kind == Kind::uniform_box) return value * support.volume();
    if (kind == Kind::semicircle) return std::pow(blowup_scale, d);
    return mass_in(support.bounding_box());
  }

  DensityField scaled(double lam) const {
    DensityField out = *this;
    out.blowup_scale = blowup_scale * lam;
    out.support = support.scaled(lam);
    out.holder_norm = holder_norm / std::pow(lam, holder_alpha);
    return out;
  }
};

inline DensityField make_semicircle(double R) {
  if (!(R > 0.0)) throw DomainError("semicircle radius must be positive");
  DensityField f;
  f.kind = DensityField::Kind::semicircle;
  f.d = 1;
  f.radius = R;
  f.support = Support::ball({0.0}, R);
  f.holder_alpha = 0.5;
  f.holder_norm = 2.0 / (std::numbers::pi * R * R) * std::sqrt(2.0 * R);
  f.m_lower = 0.0;
  f.m_upper = 2.0 / (std::numbers::pi * R);
  return f;
}

inline DensityField make_uniform_ball(int d, double R, double value = -1.0) {
  if (!(R > 0.0)) throw DomainError("ball radius must be positive");
  DensityField f;
  f.kind = DensityField::Kind::uniform_ball;
  f.d = d;
  f.radius = R;
  f.support = Support::ball(std::vector<double>(d, 0.0), R);
  f.value = value > 0.0 ? value : 1.0 / ball_volume(d, R);
  f.holder_alpha = 1.0;
  f.m_lower = f.m_upper = f.value;
  return f;
}

// Constant density on a box (mass value * |box|).
inline DensityField make_uniform_box(const Hyperrectangle& box, double value) {
  if (!(value > 0.0)) throw DomainError("uniform density must be positive");
  DensityField f;
  f.kind = DensityField::Kind::uniform_box;
  f.d = box.dim();
  f.support = Support::from_box(box);
  f.value = value;
  f.holder_alpha = 1.0;
  f.m_lower = f.m_upper = value;
  return f;
}

inline DensityField make_custom_density(int d, PointFn fn, Support support, double m_lower, double m_upper,
                                        double holder_alpha = 1.0, double holder_norm = 0.0) {
  DensityField f;
  f.kind = DensityField::Kind::custom;
  f.d = d;
  f.custom_fn = std::move(fn);
  f.support = std::move(support);
  f.m_lower = m_lower;
  f.m_upper = m_upper;
  f.holder_alpha = holder_alpha;
  f.holder_norm = holder_norm;
  return f;
}

// Catalogue: 1D log gas and Coulomb gases with V = a|x|^2.
inline DensityField equilibrium_measure(const GasModel& model) {
  const KernelSpec& k = model.kernel;
  if (!model.potential.is_quadratic()) throw UnsupportedError("equilibrium_measure: only quadratic potentials are catalogued");
  double a = model.potential.a;
  if (k.kind == KernelKind::log1d) return make_semicircle(std::sqrt(2.0 / a));
  if (k.kind == KernelKind::log2d) return make_uniform_ball(2, 1.0 / std::sqrt(a));
  if (k.k == 0) return make_uniform_ball(k.d, std::pow((k.d - 2.0) / a, 1.0 / k.d));
  throw UnsupportedError("equilibrium_measure: model not in the analytic catalogue");
}

namespace detail {

// Integral of g(r) r^(d-1) from 0 to r.
inline double radial_primitive(const KernelSpec& spec, int d, double r) {
  if (r <= 0.0) return 0.0;
  if (spec.is_log()) return std::pow(r, d) * (-std::log(r) / d + 1.0 / (d * d));
  return std::pow(r, d - spec.s) / (d - spec.s);
}

// Integral over r in [r0, r1] of g(r) m(x + r w) r^(d-1).
inline double ray_integral(const KernelSpec& spec, const DensityField& mu, std::span<const double> x,
                           std::span<const double> w, double r0, double r1) {
  int d = mu.d;
  if (mu.is_uniform()) return mu.value * (radial_primitive(spec, d, r1) - radial_primitive(spec, d, r0));
  std::vector<double> y(d);
  auto f = [&](double r) {
    if (r <= 0.0) return 0.0;
    for (int i = 0; i < d; ++i) y[i] = x[i] + r * w[i];
    return g_radial(spec, r) * mu(y) * std::pow(r, d - 1);
  };
  return quad::integrate_endpoint_singular(f, r0, r1, 1e-12);
}

inline double ray_total(const KernelSpec& spec, const DensityField& mu, std::span<const double> x, std::span<const double> w) {
  auto ch = mu.support.chord(x, w);
  if (!ch) return 0.0;
  return ray_integral(spec, mu, x, w, ch->first, ch->second);
}

}  // namespace detail

// Potential h^mu(x) = int g(x - y) dmu(y), integrated along rays from x.
inline double potential_of_density(const KernelSpec& spec, const DensityField& mu, std::span<const double> x) {
  int d = mu.d;
  if (d != spec.d || static_cast<int>(x.size()) != d) throw DomainError("potential_of_density: dimension mismatch");
  if (d == 1) {
    double plus[1] = {1.0};
    double minus[1] = {-1.0};
    return detail::ray_total(spec, mu, x, plus) + detail::ray_total(spec, mu, x, minus);
  }
  if (d == 2) {
    // angular breakpoints: directions of box corners or ball tangents
    std::vector<double> cuts{0.0, 2.0 * std::numbers::pi};
    auto add = [&](double th) {
      th = std::fmod(th, 2.0 * std::numbers::pi);
      if (th < 0.0) th += 2.0 * std::numbers::pi;
      cuts.push_back(th);
    };
    const Support& sp = mu.support;
    if (sp.shape == Support::Shape::box) {
      for (int c = 0; c < 4; ++c) {
        double cx = (c & 1) ? sp.box.hi(0) : sp.box.lo(0);
        double cy = (c & 2) ? sp.box.hi(1) : sp.box.lo(1);
        if (cx != x[0] || cy != x[1]) add(std::atan2(cy - x[1], cx - x[0]));
      }
    } else {
      double dx = sp.center[0] - x[0];
      double dy = sp.center[1] - x[1];
      double dist = std::hypot(dx, dy);
      if (dist > sp.radius) {
        double base = std::atan2(dy, dx);
        double half = std::asin(sp.radius / dist);
        add(base - half);
        add(base + half);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    auto f = [&](double th) {
      double w[2] = {std::cos(th), std::sin(th)};
      return detail::ray_total(spec, mu, x, w);
    };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      if (cuts[i + 1] - cuts[i] > 1e-14) total += quad::integrate_endpoint_singular(f, cuts[i], cuts[i + 1], 1e-11);
    return total;
  }
  // d = 3: polar axis toward the support centre, azimuth by the periodic trapezoid rule
  const Support& sp = mu.support;
  double e3[3];
  double dist = 0.0;
  for (int i = 0; i < 3; ++i) {
    e3[i] = sp.center[i] - x[i];
    dist += e3[i] * e3[i];
  }
  dist = std::sqrt(dist);
  if (dist < 1e-14) {
    e3[0] = 0.0;
    e3[1] = 0.0;
    e3[2] = 1.0;
  } else {
    for (double& v : e3) v /= dist;
  }
  double e1[3];
  double e2[3];
  {
    double t[3] = {1.0, 0.0, 0.0};
    if (std::abs(e3[0]) > 0.9) t[0] = 0.0, t[1] = 1.0;
    double dot = t[0] * e3[0] + t[1] * e3[1] + t[2] * e3[2];
    double nn = 0.0;
    for (int i = 0; i < 3; ++i) {
      e1[i] = t[i] - dot * e3[i];
      nn += e1[i] * e1[i];
    }
    nn = std::sqrt(nn);
    for (double& v : e1) v /= nn;
    e2[0] = e3[1] * e1[2] - e3[2] * e1[1];
    e2[1] = e3[2] * e1[0] - e3[0] * e1[2];
    e2[2] = e3[0] * e1[1] - e3[1] * e1[0];
  }
  std::vector<double> cuts{0.0, std::numbers::pi};
  if (sp.shape == Support::Shape::ball && dist > sp.radius) cuts.push_back(std::asin(sp.radius / dist));
  std::sort(cuts.begin(), cuts.end());
  const int naz = sp.shape == Support::Shape::ball && mu.is_uniform() ? 1 : 64;
  auto f = [&](double ph) {
    double acc = 0.0;
    for (int j = 0; j < naz; ++j) {
      double th = 2.0 * std::numbers::pi * j / naz;
      double w[3];
      for (int i = 0; i < 3; ++i)
        w[i] = std::sin(ph) * (std::cos(th) * e1[i] + std::sin(th) * e2[i]) + std::cos(ph) * e3[i];
      acc += detail::ray_total(spec, mu, x, w);
    }
    return 2.0 * std::numbers::pi * std::sin(ph) * acc / naz;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] - cuts[i] > 1e-14) total += quad::integrate_endpoint_singular(f, cuts[i], cuts[i + 1], 1e-10);
  return total;
}

namespace detail {

// Integral of f over the support of mu against mu, by tensor Gauss-Legendre
// on the bounding box (ball supports in 1D/2D use polar coordinates).
template <class F>
double integrate_against(const DensityField& mu, F&& f) {
  int d = mu.d;
  const Support& sp = mu.support;
  if (d == 1) {
    Hyperrectangle bb = sp.bounding_box();
    auto g = [&](double t) {
      double x[1] = {t};
      return f(std::span<const double>(x, 1)) * mu(std::span<const double>(x, 1));
    };
    return quad::integrate_endpoint_singular(g, bb.lo(0), bb.hi(0), 1e-11);
  }
  if (d == 2 && sp.shape == Support::Shape::ball) {
    auto radial = [&](double r) {
      auto ang = [&](double th) {
        double x[2] = {sp.center[0] + r * std::cos(th), sp.center[1] + r * std::sin(th)};
        return f(std::span<const double>(x, 2)) * mu(std::span<const double>(x, 2));
      };
      return r * quad::integrate_gl(ang, 0.0, 2.0 * std::numbers::pi, 24, 4);
    };
    return quad::integrate_gl(radial, 0.0, sp.radius, 24, 4);
  }
  if (d == 3 && sp.shape == Support::Shape::ball) {
    const int naz = 32;
    auto radial = [&](double r) {
      auto polar = [&](double ph) {
        double acc = 0.0;
        for (int j = 0; j < naz; ++j) {
          double th = 2.0 * std::numbers::pi * j / naz;
          double x[3] = {sp.center[0] + r * std::sin(ph) * std::cos(th), sp.center[1] + r * std::sin(ph) * std::sin(th),
                         sp.center[2] + r * std::cos(ph)};
          acc += f(std::span<const double>(x, 3)) * mu(std::span<const double>(x, 3));
        }
        return std::sin(ph) * acc * 2.0 * std::numbers::pi / naz;
      };
      return r * r * quad::integrate_gl(polar, 0.0, std::numbers::pi, 16, 2);
    };
    return quad::integrate_gl(radial, 0.0, sp.radius, 16, 2);
  }
  Hyperrectangle bb = sp.bounding_box();
  const int order = 12;
  const int panels = d == 3 ? 3 : 6;
  std::vector<std::vector<quad::Node>> axes(d);
  for (int i = 0; i < d; ++i) {
    double h = bb.side(i) / panels;
    for (int p = 0; p < panels; ++p) quad::append_gl(axes[i], bb.lo(i) + p * h, bb.lo(i) + (p + 1) * h, order);
  }
  std::vector<double> x(d);
  std::vector<std::size_t> idx(d, 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      x[i] = axes[i][idx[i]].x;
      w *= axes[i][idx[i]].w;
    }
    double m = mu(x);
    if (m != 0.0) total += w * m * f(std::span<const double>(x));
    int j = 0;
    while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
    if (j == d) break;
  }
  return total;
}

// Closed forms for the catalogued pairs (centred support, quadratic V).
inline std::optional<std::pair<double, double>> catalogue_energy_parts(const GasModel& model, const DensityField& mu) {
  const KernelSpec& k = model.kernel;
  if (!model.potential.is_quadratic() || mu.blowup_scale != 1.0) return std::nullopt;
  for (double c : mu.support.center)
    if (c != 0.0) return std::nullopt;
  double a = model.potential.a;
  double R = mu.radius;
  if (mu.kind == DensityField::Kind::semicircle && k.kind == KernelKind::log1d)
    return std::make_pair(-std::log(R / 2.0) + 0.25, a * R * R / 4.0);
  if (mu.kind == DensityField::Kind::uniform_ball && std::abs(mu.total_mass() - 1.0) < 1e-12) {
    if (k.kind == KernelKind::log2d) return std::make_pair(-std::log(R) + 0.25, a * R * R / 2.0);
    if (k.k == 0 && k.d >= 3) {
      int d = k.d;
      return std::make_pair(2.0 * d * std::pow(R, 2.0 - d) / (d + 2.0), a * d * R * R / (d + 2.0));
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Pair energy iint g dmu dmu and potential energy int V dmu.
inline std::pair<double, double> meanfield_parts(const GasModel& model, const DensityField& mu, bool allow_closed_form = true) {
  if (allow_closed_form) {
    if (auto cf = detail::catalogue_energy_parts(model, mu)) {
      cf->second += model.potential.shift;
      return *cf;
    }
  }
  double pair = detail::integrate_against(mu, [&](std::span<const double> x) { return potential_of_density(model.kernel, mu, x); });
  double pot = detail::integrate_against(mu, [&](std::span<const double> x) { return model.potential(x); });
  if (!std::isfinite(pair) || !std::isfinite(pot)) throw NumericError("meanfield_energy: divergent quadrature");
  return {pair, pot};
}

inline double meanfield_energy(const GasModel& model, const DensityField& mu, bool allow_closed_form = true) {
  auto [pair, pot] = meanfield_parts(model, mu, allow_closed_form);
  return pair + pot;
}

// Effective potential zeta = h^mu + V/2 - c with c = I(mu) - int V/2 dmu.
class EffectivePotential {
 public:
  EffectivePotential(GasModel model, DensityField mu) : model_(std::move(model)), mu_(std::move(mu)) {
    auto [pair, pot] = meanfield_parts(model_, mu_);
    energy_ = pair + pot;
    robin_ = energy_ - 0.5 * pot;
  }

  double operator()(std::span<const double> x) const {
    double z = potential_of_density(model_.kernel, mu_, x) + 0.5 * model_.potential(x) - robin_;
    if (!std::isfinite(z)) throw NumericError("zeta: quadrature failure");
    if (z < 0.0 && z > -1e-8) return 0.0;
    return z;
  }

  double meanfield_energy() const { return energy_; }
  double robin_constant() const { return robin_; }
  const DensityField& measure() const { return mu_; }
  const GasModel& model() const { return model_; }

 private:
  GasModel model_;
  DensityField mu_;
  double energy_ = 0.0;
  double robin_ = 0.0;
};

inline double zeta(const GasModel& model, const DensityField& mu, std::span<const double> x) {
  return EffectivePotential(model, mu)(x);
}

// x' = n^{1/d} x and m'(x') = m(x).
inline std::pair<Configuration, DensityField> blow_up(const Configuration& config, const DensityField& mu) {
  if (config.scale != Configuration::Scale::macroscopic || mu.blowup_scale != 1.0)
    throw DomainError("blow_up: inputs must be macroscopic");
  int n = config.size();
  double lam = std::pow(static_cast<double>(n), 1.0 / config.d);
  Configuration out = config;
  for (double& v : out.coords) v *= lam;
  out.scale = Configuration::Scale::blown_up;
  return {std::move(out), mu.scaled(lam)};
}

inline std::pair<Configuration, DensityField> blow_down(const Configuration& config, const DensityField& mu) {
  int n = config.size();
  double lam = std::pow(static_cast<double>(n), 1.0 / config.d);
  Configuration out = config;
  for (double& v : out.coords) v /= lam;
  out.scale = Configuration::Scale::macroscopic;
  DensityField m = mu.scaled(1.0 / lam);
  m.blowup_scale = 1.0;
  return {std::move(out), std::move(m)};
}

}  // namespace riesz
