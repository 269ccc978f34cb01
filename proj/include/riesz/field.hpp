#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "riesz/background.hpp"
#include "riesz/box.hpp"
#include "riesz/errors.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/parallel.hpp"
#include "riesz/quadrature.hpp"

namespace riesz {

// Charges Lambda (blown-up scale) with neutralizing background m' on R^d x {0}.
struct FieldContext {
  KernelSpec spec;
  Configuration charges;
  std::optional<DensityField> background;
  double eta = 0.1;
  BackgroundField bg;

  FieldContext(KernelSpec sp, Configuration c, std::optional<DensityField> m, double e)
      : spec(std::move(sp)), charges(std::move(c)), background(std::move(m)), eta(e) {
    check_eta(eta);
    if (charges.size() > 0 && charges.d != spec.d) throw DomainError("FieldContext: charge dimension mismatch");
    bg = make_background(spec, background);
  }

  int ext_dim() const { return spec.ext_dim(); }

  FieldContext with_eta(double e) const {
    check_eta(e);
    FieldContext out = *this;
    out.eta = e;
    return out;
  }
};

namespace detail {

template <bool Truncate>
inline XPoint charge_field(const FieldContext& ctx, const XPoint& X, double eta) {
  const KernelSpec& spec = ctx.spec;
  int d = spec.d;
  int D = spec.ext_dim();
  double eta2 = eta * eta;
  XPoint e{};
  int n = ctx.charges.size();
  const double* c = ctx.charges.coords.data();
  bool log = spec.is_log();
  double ex = -0.5 * spec.s - 1.0;
  for (int p = 0; p < n; ++p) {
    double z[kMaxExtDim];
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) {
      z[i] = X[i] - c[p * d + i];
      r2 += z[i] * z[i];
    }
    for (int i = d; i < D; ++i) {
      z[i] = X[i];
      r2 += z[i] * z[i];
    }
    if (Truncate && r2 <= eta2) continue;
    double f = log ? -1.0 / r2 : -spec.s * std::pow(r2, ex);
    for (int i = 0; i < D; ++i) e[i] += f * z[i];
  }
  return e;
}

inline double norm2(const XPoint& e, int D) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += e[i] * e[i];
  return s;
}

}  // namespace detail

// E_eta(X) = sum_p grad g_eta(X - p) - grad(g * m' delta)(X).
inline XPoint e_eta_at(const FieldContext& ctx, const XPoint& X) {
  XPoint e = detail::charge_field<true>(ctx, X, ctx.eta);
  XPoint b = ctx.bg(X);
  for (int i = 0; i < ctx.ext_dim(); ++i) e[i] += b[i];
  return e;
}

// Untruncated field E (X away from the charges).
inline XPoint e_at(const FieldContext& ctx, const XPoint& X) {
  XPoint e = detail::charge_field<false>(ctx, X, 0.0);
  XPoint b = ctx.bg(X);
  for (int i = 0; i < ctx.ext_dim(); ++i) e[i] += b[i];
  return e;
}

struct QuadratureGrid {
  Hyperrectangle window;
  double t_max = 0.0;       // vertical cutoff for k = 1; 0 selects diam(window)
  double resolution = 8.0;  // cells per unit length
  int order = 6;            // Gauss-Legendre nodes per cell
  int vertical_layers = 12; // geometric layers toward y = 0
  int patch_order = 24;     // radial / angular order inside charge patches
  int angular_layers = 12;  // geometric layers toward the plane inside patches
  bool tail = true;         // estimate the energy above t_max (k = 1)

  void validate(double eta) const {
    if (!(resolution > 0.0) || order < 2 || patch_order < 2) throw ValidationError("quadrature grid: bad resolution or order");
    if (!(eta > 0.0)) throw ValidationError("quadrature grid: eta must be positive");
  }

  QuadratureGrid refined(double factor = 2.0) const {
    QuadratureGrid g = *this;
    g.resolution *= factor;
    g.patch_order = std::min(quad::kMaxOrder, static_cast<int>(std::lround(patch_order * factor)));
    g.angular_layers += 8;
    g.vertical_layers += 8;
    return g;
  }
};

struct WindowEnergyReport {
  double w_eta = 0.0;
  double quad_integral = 0.0;
  double smeared_mass = 0.0;
  int point_count = 0;
  double per_volume = 0.0;
  double volume = 0.0;
  double eta = 0.0;
  double tail_estimate = 0.0;  // energy above the vertical cutoff (k = 1), not included
};

namespace detail {

struct Patch {
  int idx = 0;
  double R = 0.0;
  double r_in = 0.0;
  XPoint P{};
};

inline double smoothstep7(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double t4 = t * t * t * t;
  return t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
}

inline double chi(const Patch& p, double r) {
  if (r <= p.r_in) return 1.0;
  if (r >= p.R) return 0.0;
  return smoothstep7((p.R - r) / (p.R - p.r_in));
}

// Ray P + r w clipped to K x R^k: interval of r >= 0.
inline std::optional<std::pair<double, double>> window_chord(const Hyperrectangle& K, int d, const XPoint& P, const double* w) {
  double r0 = 0.0;
  double r1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    if (w[i] == 0.0) {
      if (P[i] < K.lo(i) || P[i] > K.hi(i)) return std::nullopt;
      continue;
    }
    double ta = (K.lo(i) - P[i]) / w[i];
    double tb = (K.hi(i) - P[i]) / w[i];
    if (ta > tb) std::swap(ta, tb);
    r0 = std::max(r0, ta);
    r1 = std::min(r1, tb);
  }
  if (r1 <= r0) return std::nullopt;
  return std::make_pair(r0, r1);
}

// Faces of a box-shaped background support, where the field is singular on the plane.
inline std::vector<std::vector<double>> background_kinks(const FieldContext& ctx) {
  std::vector<std::vector<double>> out(ctx.spec.d);
  if (!ctx.background) return out;
  const DensityField& m = *ctx.background;
  if (m.support.shape == Support::Shape::box) {
    for (int i = 0; i < ctx.spec.d; ++i) out[i] = {m.support.box.lo(i), m.support.box.hi(i)};
  } else if (ctx.spec.d == 1) {
    out[0] = {m.support.center[0] - m.support.radius, m.support.center[0] + m.support.radius};
  }
  return out;
}

inline std::vector<Patch> build_patches(const FieldContext& ctx, const Hyperrectangle& K) {
  const Configuration& c = ctx.charges;
  int n = c.size();
  double eta = ctx.eta;
  double reach = std::max(8.0 * eta, 1.0);
  auto kinks = background_kinks(ctx);
  std::vector<Patch> out;
  for (int i = 0; i < n; ++i) {
    auto p = c.point(i);
    if (K.distance_to(p) >= reach) continue;
    double nn = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double r2 = 0.0;
      for (int k = 0; k < c.d; ++k) r2 += (p[k] - c.point(j)[k]) * (p[k] - c.point(j)[k]);
      nn = std::min(nn, r2);
    }
    nn = std::sqrt(nn);
    if (!(0.5 * nn > eta))
      throw GeometryError("window_energy: eta must be below half the minimum separation of charges near the window");
    Patch pt;
    pt.idx = i;
    pt.R = std::min(0.5 * nn, reach);
    if (ctx.spec.ext_dim() == 3 && K.contains_closed(p)) {
      double db = K.distance_to_boundary(p);
      if (db >= 2.0 * eta) pt.R = std::min(pt.R, db);
    }
    // keep the singular edge of the background out of the patch
    double edge = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(kinks.size()); ++k)
      for (double v : kinks[k]) edge = std::min(edge, std::abs(p[k] - v));
    if (ctx.background && ctx.background->support.shape == Support::Shape::ball) {
      const Support& sp = ctx.background->support;
      double r2 = 0.0;
      for (int k = 0; k < c.d; ++k) r2 += (p[k] - sp.center[k]) * (p[k] - sp.center[k]);
      edge = std::min(edge, std::abs(std::sqrt(r2) - sp.radius));
    }
    if (edge >= 1.5 * eta) pt.R = std::min(pt.R, edge);
    if (K.distance_to(p) >= pt.R) continue;
    pt.r_in = eta + 0.25 * (pt.R - eta);
    for (int k = 0; k < c.d; ++k) pt.P[k] = p[k];
    out.push_back(pt);
  }
  return out;
}

// Integral over r in [ra, rb] ∩ [0, R] of r^(D-1) chi(r) |y|^gamma |E|^2 along P + r w.
inline double radial_sum(const FieldContext& ctx, const Patch& pt, const double* w, double ra, double rb, int order) {
  int D = ctx.ext_dim();
  int d = ctx.spec.d;
  double gamma = ctx.spec.gamma;
  bool ext = ctx.spec.k == 1;
  const quad::Rule& rule = quad::gauss_legendre(order);
  double eta = ctx.eta;
  double total = 0.0;
  auto eval = [&](double r) {
    XPoint X = pt.P;
    for (int i = 0; i < D; ++i) X[i] += r * w[i];
    double f = norm2(e_eta_at(ctx, X), D) * chi(pt, r) * std::pow(r, D - 1);
    if (ext) f *= std::pow(std::abs(X[d]), gamma);
    return f;
  };
  struct Piece {
    double a, b;
    bool log;
    int panels;
  };
  Piece pieces[3] = {{0.0, eta, false, 1}, {eta, pt.r_in, true, 1}, {pt.r_in, pt.R, false, 2}};
  for (const Piece& pc : pieces) {
    double a = std::max(pc.a, ra);
    double b = std::min(pc.b, rb);
    if (!(b > a)) continue;
    if (ext && a == 0.0) {
      // the background layer makes |y|^gamma |E|^2 ~ r^-|gamma| at the centre
      std::vector<quad::Node> nodes;
      quad::append_graded(nodes, 0.0, b, 0.0, 6, order, D - 1 - std::abs(gamma));
      for (const auto& nd : nodes) total += nd.w * eval(nd.x);
    } else if (pc.log) {
      double ua = std::log(a);
      double ub = std::log(b);
      double h = 0.5 * (ub - ua);
      double m = 0.5 * (ub + ua);
      for (int i = 0; i < order; ++i) {
        double r = std::exp(m + h * rule.x[i]);
        total += h * rule.w[i] * r * eval(r);
      }
    } else {
      double hp = (b - a) / pc.panels;
      for (int p = 0; p < pc.panels; ++p) {
        double lo = a + p * hp;
        double h = 0.5 * hp;
        double m = lo + h;
        for (int i = 0; i < order; ++i) total += h * rule.w[i] * eval(m + h * rule.x[i]);
      }
    }
  }
  return total;
}

inline void add_angle(std::vector<double>& cuts, double th, double lo, double hi) {
  const double two_pi = 2.0 * std::numbers::pi;
  if (hi - lo > 6.0) {
    th = std::fmod(th, two_pi);
    if (th < 0.0) th += two_pi;
  }
  if (th > lo && th < hi) cuts.push_back(th);
}

inline double sum_nodes(const std::vector<quad::Node>& nodes, const std::function<double(double)>& f) {
  std::vector<double> vals(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) vals[i] = nodes[i].w * f(nodes[i].x);
  double total = 0.0;
  for (double v : vals) total += v;
  return total;
}

// Energy of one patch: plane polar coordinates (D = 2). For k = 1 each
// quarter plane uses the angle from the horizontal, so the plane sits at 0.
inline double patch_energy_2d(const FieldContext& ctx, const Hyperrectangle& K, const Patch& pt, const QuadratureGrid& grid) {
  int d = ctx.spec.d;
  auto ray = [&](const double* w) {
    auto ch = window_chord(K, d, pt.P, w);
    return ch ? radial_sum(ctx, pt, w, ch->first, ch->second, grid.patch_order) : 0.0;
  };
  if (ctx.spec.k == 1) {
    double sing = -std::abs(ctx.spec.gamma);
    double top = 0.5 * std::numbers::pi;
    double total = 0.0;
    for (double side : {1.0, -1.0}) {
      std::vector<double> cuts{0.0, top};
      for (double rho : {ctx.eta, pt.r_in, pt.R})
        for (double c : {K.lo(0), K.hi(0)}) {
          double v = side * (c - pt.P[0]) / rho;
          if (v > 0.0 && v < 1.0) cuts.push_back(std::acos(v));
        }
      std::sort(cuts.begin(), cuts.end());
      std::vector<quad::Node> nodes;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 1e-15) continue;
        if (i == 0)
          quad::append_graded(nodes, cuts[0], cuts[1], cuts[0], grid.angular_layers, 8, sing);
        else
          quad::append_gl(nodes, cuts[i], cuts[i + 1], grid.patch_order);
      }
      total += sum_nodes(nodes, [&](double th) {
        double w[kMaxExtDim] = {side * std::cos(th), std::sin(th), 0.0, 0.0};
        return ray(w);
      });
    }
    return 2.0 * total;
  }
  double lo = 0.0;
  double hi = 2.0 * std::numbers::pi;
  std::vector<double> cuts{lo, hi};
  for (double rho : {ctx.eta, pt.r_in, pt.R}) {
    for (int ax = 0; ax < d; ++ax) {
      for (double c : {K.lo(ax), K.hi(ax)}) {
        double v = (c - pt.P[ax]) / rho;
        if (v <= -1.0 || v >= 1.0) continue;
        if (ax == 0) {
          double a = std::acos(v);
          add_angle(cuts, a, lo, hi);
          add_angle(cuts, -a, lo, hi);
        } else {
          double a = std::asin(v);
          add_angle(cuts, a, lo, hi);
          add_angle(cuts, std::numbers::pi - a, lo, hi);
        }
      }
    }
  }
  for (int cidx = 0; cidx < 4; ++cidx) {
    double cx = (cidx & 1) ? K.hi(0) : K.lo(0);
    double cy = (cidx & 2) ? K.hi(1) : K.lo(1);
    if (std::hypot(cx - pt.P[0], cy - pt.P[1]) < pt.R) add_angle(cuts, std::atan2(cy - pt.P[1], cx - pt.P[0]), lo, hi);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<quad::Node> nodes;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] - cuts[i] > 1e-15) quad::append_gl(nodes, cuts[i], cuts[i + 1], grid.patch_order);
  return sum_nodes(nodes, [&](double th) {
    double w[kMaxExtDim] = {std::cos(th), std::sin(th), 0.0, 0.0};
    return ray(w);
  });
}

// Spherical coordinates about the patch centre (D = 3). For k = 1 the
// elevation above the plane is the graded variable.
inline double patch_energy_3d(const FieldContext& ctx, const Hyperrectangle& K, const Patch& pt, const QuadratureGrid& grid) {
  int d = ctx.spec.d;
  bool ext = ctx.spec.k == 1;
  std::vector<quad::Node> th;
  if (ext) {
    quad::append_graded(th, 0.0, 0.5 * std::numbers::pi, 0.0, grid.angular_layers, 8, -std::abs(ctx.spec.gamma));
  } else {
    for (int p = 0; p < 4; ++p) quad::append_gl(th, p * std::numbers::pi / 4, (p + 1) * std::numbers::pi / 4, grid.patch_order);
  }
  std::vector<quad::Node> ph;
  const int panels = 16;
  for (int p = 0; p < panels; ++p)
    quad::append_gl(ph, 2.0 * std::numbers::pi * p / panels, 2.0 * std::numbers::pi * (p + 1) / panels, 8);
  double total = 0.0;
  for (const auto& t : th) {
    // k = 1: t is the elevation; k = 0: t is the polar angle
    double vert = ext ? std::sin(t.x) : std::cos(t.x);
    double horiz = ext ? std::cos(t.x) : std::sin(t.x);
    for (const auto& f : ph) {
      double w[kMaxExtDim] = {horiz * std::cos(f.x), horiz * std::sin(f.x), vert, 0.0};
      auto ch = window_chord(K, d, pt.P, w);
      if (!ch) continue;
      total += t.w * f.w * horiz * radial_sum(ctx, pt, w, ch->first, ch->second, grid.patch_order);
    }
  }
  return ext ? 2.0 * total : total;
}

// Nodes on [0, top] for the vertical direction: geometric toward 0 up to h,
// uniform panels of width h to y_mid, then geometric growth (ratio 1.5).
inline std::vector<quad::Node> vertical_nodes(double top, double h, double y_mid, int layers, int order, double power) {
  std::vector<quad::Node> out;
  double first = std::min(h, top);
  quad::append_graded(out, 0.0, first, 0.0, layers, order, power);
  double y = first;
  while (y < std::min(y_mid, top) - 1e-14) {
    double nx = std::min(y + h, top);
    quad::append_gl(out, y, nx, order);
    y = nx;
  }
  while (y < top - 1e-14) {
    double nx = std::min(1.5 * y, top);
    quad::append_gl(out, y, nx, order);
    y = nx;
  }
  return out;
}

// Tensor axes over K with cells of width <= h. Cells touching an entry of
// `kinks[i]` (an edge of the background support) are graded toward it.
inline std::vector<std::vector<quad::Node>> horizontal_axes(const Hyperrectangle& K, double h, int order,
                                                            const std::vector<std::vector<double>>& kinks = {}, int layers = 0) {
  std::vector<std::vector<quad::Node>> axes(K.dim());
  for (int i = 0; i < K.dim(); ++i) {
    std::vector<double> cuts{K.lo(i), K.hi(i)};
    if (i < static_cast<int>(kinks.size()))
      for (double v : kinks[i])
        if (v > K.lo(i) && v < K.hi(i)) cuts.push_back(v);
    std::sort(cuts.begin(), cuts.end());
    auto is_kink = [&](double v) {
      if (i >= static_cast<int>(kinks.size())) return false;
      return std::find(kinks[i].begin(), kinks[i].end(), v) != kinks[i].end();
    };
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      double a = cuts[s];
      double b = cuts[s + 1];
      int cells = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
      double w = (b - a) / cells;
      for (int c = 0; c < cells; ++c) {
        double lo = a + c * w;
        double hi = c + 1 == cells ? b : a + (c + 1) * w;
        bool gl = layers > 0 && c == 0 && is_kink(a);
        bool gh = layers > 0 && c + 1 == cells && is_kink(b);
        if (gl && gh) {
          double m = 0.5 * (lo + hi);
          quad::append_graded(axes[i], lo, m, lo, layers, order);
          quad::append_graded(axes[i], m, hi, hi, layers, order);
        } else if (gl) {
          quad::append_graded(axes[i], lo, hi, lo, layers, order);
        } else if (gh) {
          quad::append_graded(axes[i], lo, hi, hi, layers, order);
        } else {
          quad::append_gl(axes[i], lo, hi, order);
        }
      }
    }
  }
  return axes;
}

// Integral over K x [y-nodes] of (1 - sum chi) |y|^gamma |E_eta|^2 (one side for k = 1).
inline double remainder_energy(const FieldContext& ctx, const Hyperrectangle& K, const std::vector<Patch>& patches,
                               double h, int order, const std::vector<quad::Node>& ynodes, int kink_layers = 0) {
  int d = ctx.spec.d;
  int D = ctx.ext_dim();
  bool ext = ctx.spec.k == 1;
  double gamma = ctx.spec.gamma;
  auto kinks = background_kinks(ctx);
  double r_max = 0.0;
  for (const Patch& p : patches) r_max = std::max(r_max, p.R);

  // sum over a horizontal tensor grid at height y (y = 0 when k = 0)
  auto layer = [&](const std::vector<std::vector<quad::Node>>& axes, double y) {
    std::vector<std::size_t> idx(d, 0);
    XPoint X{};
    if (ext) X[d] = y;
    double acc = 0.0;
    while (true) {
      double w = 1.0;
      for (int i = 0; i < d; ++i) {
        X[i] = axes[i][idx[i]].x;
        w *= axes[i][idx[i]].w;
      }
      double s = 0.0;
      for (const Patch& p : patches) {
        double r2 = 0.0;
        for (int i = 0; i < D; ++i) r2 += (X[i] - p.P[i]) * (X[i] - p.P[i]);
        if (r2 < p.R * p.R) s += chi(p, std::sqrt(r2));
      }
      if (1.0 - s > 1e-15) acc += w * (1.0 - s) * norm2(e_eta_at(ctx, X), D);
      int j = 0;
      while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
      if (j == d) break;
    }
    return acc;
  };

  if (!ext) {
    auto axes = horizontal_axes(K, h, order, kinks, kink_layers);
    // split the first axis across workers
    std::vector<double> vals(axes[0].size(), 0.0);
    parallel_for(static_cast<int>(axes[0].size()), [&](int i) {
      auto sub = axes;
      sub[0] = {axes[0][i]};
      vals[i] = layer(sub, 0.0);
    });
    double total = 0.0;
    for (double v : vals) total += v;
    return total;
  }
  // above the patches the field varies on the scale y, so cells widen with height
  std::vector<double> vals(ynodes.size(), 0.0);
  parallel_for(static_cast<int>(ynodes.size()), [&](int iy) {
    double y = ynodes[iy].x;
    double hy = y > r_max ? std::max(h, y / 3.0) : h;
    auto axes = horizontal_axes(K, hy, order, kinks, kink_layers);
    vals[iy] = ynodes[iy].w * std::pow(y, gamma) * layer(axes, y);
  });
  double total = 0.0;
  for (double v : vals) total += v;
  return total;
}

}  // namespace detail

inline double diameter(const Hyperrectangle& K) {
  double s = 0.0;
  for (int i = 0; i < K.dim(); ++i) s += K.side(i) * K.side(i);
  return std::sqrt(s);
}

// W_eta(E, K) = int_{K x R^k} |y|^gamma |E_eta|^2 - c_{s,d} g(eta) (smeared mass in K).
inline WindowEnergyReport window_energy(const FieldContext& ctx, const QuadratureGrid& grid) {
  const Hyperrectangle& K = grid.window;
  if (K.dim() != ctx.spec.d) throw DomainError("window_energy: window dimension mismatch");
  grid.validate(ctx.eta);
  int D = ctx.ext_dim();
  auto patches = detail::build_patches(ctx, K);

  std::vector<double> pe(patches.size(), 0.0);
  parallel_for(static_cast<int>(patches.size()), [&](int i) {
    pe[i] = D == 2 ? detail::patch_energy_2d(ctx, K, patches[i], grid) : detail::patch_energy_3d(ctx, K, patches[i], grid);
  });
  double patch_total = 0.0;
  for (double v : pe) patch_total += v;

  double h = 1.0 / grid.resolution;
  double min_band = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  for (const auto& p : patches) {
    min_band = std::min(min_band, p.R - p.r_in);
    r_max = std::max(r_max, p.R);
  }
  if (std::isfinite(min_band)) {
    if (0.5 * min_band * grid.resolution < 0.25)
      throw NumericError("quadrature grid too coarse: eta is too close to half the charge separation for this resolution");
    h = std::min(h, 0.5 * min_band);
  }

  WindowEnergyReport rep;
  double rem = 0.0;
  if (ctx.spec.k == 0) {
    rem = detail::remainder_energy(ctx, K, patches, h, grid.order, {}, grid.vertical_layers / 2);
  } else {
    double t_max = grid.t_max > 0.0 ? grid.t_max : diameter(K);
    auto ynodes = detail::vertical_nodes(t_max, h, std::max(r_max, 1.0) + h, grid.vertical_layers, grid.order, -std::abs(ctx.spec.gamma));
    rem = 2.0 * detail::remainder_energy(ctx, K, patches, h, grid.order, ynodes, grid.vertical_layers / 2);
    if (grid.tail) {
      auto seg = [&](double a, double b) {
        std::vector<quad::Node> nodes;
        for (double y = a; y < b - 1e-14;) {
          double nx = std::min(1.5 * y, b);
          quad::append_gl(nodes, y, nx, grid.order);
          y = nx;
        }
        return 2.0 * detail::remainder_energy(ctx, K, {}, std::max(h, t_max / 16.0), grid.order, nodes);
      };
      double t1 = seg(t_max, 2.0 * t_max);
      double t2 = seg(2.0 * t_max, 4.0 * t_max);
      double q = t1 > 0.0 ? t2 / t1 : 0.0;
      rep.tail_estimate = q < 0.9 ? t1 / (1.0 - q) : t1 + t2;
    }
  }
  rep.quad_integral = patch_total + rem;

  const Configuration& c = ctx.charges;
  for (int i = 0; i < c.size(); ++i) {
    auto p = c.point(i);
    if (K.contains_half_open(p)) ++rep.point_count;
    if (K.distance_to(p) <= ctx.eta) rep.smeared_mass += smeared_mass_in_window(ctx.spec, p, ctx.eta, K);
  }
  rep.eta = ctx.eta;
  rep.volume = K.volume();
  rep.w_eta = rep.quad_integral - ctx.spec.csd * g_radial(ctx.spec, ctx.eta) * rep.smeared_mass;
  rep.per_volume = rep.w_eta / rep.volume;
  return rep;
}

struct ProfileOptions {
  double resolution = 8.0;
  int order = 6;
  double top_factor = 4096.0;  // integrate up to top_factor * max(t)
};

// C_2(E, t, K) = |K|^{-1} int_{K x (R \ [-t, t])} |y|^gamma |E|^2 for each t,
// accumulated from the top so the profile is non-increasing in t.
template <class Field>
std::vector<double> vertical_profile(Field&& field, int d, double gamma, const Hyperrectangle& K, const std::vector<double>& t_values,
                                     const ProfileOptions& opts = {}) {
  if (t_values.empty()) return {};
  std::vector<double> ts = t_values;
  for (double t : ts)
    if (!(t > 0.0)) throw DomainError("vertical_profile: t must be positive");
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double top = ts.back() * opts.top_factor;
  std::vector<double> edges = ts;
  edges.push_back(top);
  int D = d + 1;
  auto slab = [&](double a, double b) {
    std::vector<quad::Node> ynodes;
    for (double y = a; y < b - 1e-14 * b;) {
      double nx = std::min(1.25 * y, b);
      quad::append_gl(ynodes, y, nx, opts.order);
      y = nx;
    }
    std::vector<double> vals(ynodes.size(), 0.0);
    parallel_for(static_cast<int>(ynodes.size()), [&](int iy) {
      double y = ynodes[iy].x;
      double h = std::min(1.0 / opts.resolution, 0.5 * y);
      auto axes = detail::horizontal_axes(K, h, opts.order);
      std::vector<std::size_t> idx(d, 0);
      XPoint X{};
      X[d] = y;
      double acc = 0.0;
      while (true) {
        double w = 1.0;
        for (int i = 0; i < d; ++i) {
          X[i] = axes[i][idx[i]].x;
          w *= axes[i][idx[i]].w;
        }
        acc += w * detail::norm2(field(X), D);
        int j = 0;
        while (j < d && ++idx[j] == axes[j].size()) idx[j++] = 0;
        if (j == d) break;
      }
      vals[iy] = ynodes[iy].w * std::pow(y, gamma) * acc;
    });
    double s = 0.0;
    for (double v : vals) s += v;
    return s;
  };
  std::vector<double> seg(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) seg[i] = slab(edges[i], edges[i + 1]);
  std::vector<double> cum(ts.size());
  double acc = 0.0;
  for (std::size_t i = ts.size(); i-- > 0;) {
    acc += seg[i];
    cum[i] = 2.0 * acc / K.volume();
  }
  std::vector<double> out;
  out.reserve(t_values.size());
  for (double t : t_values) out.push_back(cum[std::lower_bound(ts.begin(), ts.end(), t) - ts.begin()]);
  return out;
}

inline std::vector<double> vertical_profile(const FieldContext& ctx, const Hyperrectangle& K, const std::vector<double>& t_values,
                                            const ProfileOptions& opts = {}) {
  if (ctx.spec.k != 1) throw UnsupportedError("vertical_profile: no vertical direction when k = 0");
  return vertical_profile([&](const XPoint& X) { return e_at(ctx, X); }, ctx.spec.d, ctx.spec.gamma, K, t_values, opts);
}

struct RescaledEnergy {
  double w = 0.0;          // energy of the rescaled field on the dilated window
  double eta = 0.0;        // eta m^{1/d}
  double volume = 0.0;     // m |A|
  double per_volume = 0.0; // w / (m |A|)
};

// Transport of a window energy of a field with constant density m to density 1.
inline RescaledEnergy rescale_energy(double w, double m, double eta, double volume, const KernelSpec& spec) {
  if (!(m > 0.0)) throw DomainError("rescale_energy: m must be positive");
  int d = spec.d;
  RescaledEnergy out;
  out.eta = eta * std::pow(m, 1.0 / d);
  out.volume = m * volume;
  if (spec.is_log()) {
    out.w = w + spec.csd / d * m * volume * std::log(m);
  } else {
    out.w = std::pow(m, -spec.s / d) * w;
  }
  out.per_volume = out.w / out.volume;
  return out;
}

// Scale of the L1 norm of f_eta on R^d: eta^{d-s} (Riesz), eta^d (log).
inline double truncation_rate(const KernelSpec& spec, double eta) {
  return spec.is_log() ? std::pow(eta, spec.d) : std::pow(eta, spec.d - spec.s);
}

// 2 c_{s,d} ||f_eta||_{L1(R^d)} / truncation_rate.
inline double truncation_constant(const KernelSpec& spec) {
  int d = spec.d;
  double area = sphere_area(d);
  double l1 = spec.is_log() ? area / (d * d) : area * spec.s / (d * (d - spec.s));
  return 2.0 * spec.csd * l1;
}

struct TruncationDifference {
  double delta_w = 0.0;
  double bound_I = 0.0;
  int count_pairs = 0;
  int points_near = 0;  // #(Lambda ∩ A_eta)
  double w_alpha = 0.0;
  double w_eta = 0.0;
};

inline TruncationDifference truncation_difference(const FieldContext& ctx, const Hyperrectangle& A, double alpha, double eta,
                                                  const QuadratureGrid& grid_opts) {
  if (!(alpha > 0.0 && alpha < eta && eta < 1.0)) throw DomainError("truncation_difference: need 0 < alpha < eta < 1");
  const Configuration& c = ctx.charges;
  std::vector<int> near;
  for (int i = 0; i < c.size(); ++i) {
    auto p = c.point(i);
    if (A.distance_to_boundary(p) < eta)
      throw GeometryError("truncation_difference: a charge lies within eta of the window boundary; adjust the window with crenel_cube");
    if (A.distance_to(p) <= eta) near.push_back(i);
  }
  TruncationDifference out;
  out.points_near = static_cast<int>(near.size());
  for (std::size_t a = 0; a < near.size(); ++a)
    for (std::size_t b = 0; b < near.size(); ++b) {
      if (a == b) continue;
      {
        auto pa = c.point(near[a]);
        auto pb = c.point(near[b]);
        double r2 = 0.0;
        for (int k = 0; k < c.d; ++k) r2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
        if (r2 < 4.0 * eta * eta) ++out.count_pairs;
      }
    }
  QuadratureGrid grid = grid_opts;
  grid.window = A;
  out.w_alpha = window_energy(ctx.with_eta(alpha), grid).w_eta;
  out.w_eta = window_energy(ctx.with_eta(eta), grid).w_eta;
  out.delta_w = out.w_alpha - out.w_eta;
  double mmax = ctx.background ? ctx.background->m_upper : 0.0;
  out.bound_I = truncation_constant(ctx.spec) * mmax * out.points_near * truncation_rate(ctx.spec, eta);
  return out;
}

struct RenormalizedEstimate {
  std::vector<double> etas;
  std::vector<double> values;
  double estimate = 0.0;
};

// Extrapolation of W_eta over the ladder {eta, eta/2, eta/4} using the
// truncation rate as the leading error order.
inline RenormalizedEstimate renormalized_energy_estimate(const FieldContext& ctx, const QuadratureGrid& grid) {
  RenormalizedEstimate out;
  for (int i = 0; i < 3; ++i) {
    double e = ctx.eta / std::pow(2.0, i);
    out.etas.push_back(e);
    out.values.push_back(window_energy(ctx.with_eta(e), grid).w_eta);
  }
  double p = ctx.spec.is_log() ? ctx.spec.d : ctx.spec.d - ctx.spec.s;
  double f = std::pow(2.0, p) - 1.0;
  out.estimate = out.values[2] + (out.values[2] - out.values[1]) / f;
  return out;
}

}  // namespace riesz
