#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "riesz/geometry.hpp"
#include "riesz/random.hpp"

using namespace riesz;

namespace {

std::vector<double> v(std::initializer_list<double> x) { return x; }

Hyperrectangle box(std::initializer_list<double> lo, std::initializer_list<double> hi) { return Hyperrectangle::from_bounds(v(lo), v(hi)); }

// Mass of a product density prod_i (1 + a_i sin(w_i x_i)) / scale over a box, by 1D oracle quadrature per axis.
struct ProductDensity {
  std::vector<double> a, w;
  double scale = 1.0;

  double value(std::span<const double> x) const {
    double p = scale;
    for (std::size_t i = 0; i < a.size(); ++i) p *= 1.0 + a[i] * std::sin(w[i] * x[i]);
    return p;
  }
  double mass(const Hyperrectangle& B) const {
    double m = scale;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double ai = a[i], wi = w[i];
      m *= oracle::gl([&](double x) { return 1.0 + ai * std::sin(wi * x); }, B.lo(i), B.hi(i), 20, 8);
    }
    return m;
  }
};

Configuration separated_points(int d, const Hyperrectangle& region, double r0, int target, Rng& rng) {
  std::vector<double> c;
  int tries = 0;
  while (static_cast<int>(c.size()) < target * d && tries++ < 200 * target) {
    std::vector<double> x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(region.lo(i), region.hi(i));
    bool ok = true;
    for (std::size_t j = 0; j + d <= c.size() && ok; j += d) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) r2 += (c[j + k] - x[k]) * (c[j + k] - x[k]);
      ok = r2 >= r0 * r0;
    }
    if (ok) c.insert(c.end(), x.begin(), x.end());
  }
  return Configuration(d, std::move(c), Configuration::Scale::blown_up);
}

}  // namespace

TEST(Subdivide, UniformRectangle) {
  auto cells = subdivide(box({0.0, 0.0}, {2.0, 3.0}), BoundedDensity::constant(1.0), 0);
  ASSERT_EQ(cells.size(), 6u);
  double vol = 0.0;
  for (auto& c : cells) {
    EXPECT_NEAR(c.volume(), 1.0, 1e-12);
    vol += c.volume();
  }
  EXPECT_NEAR(vol, 6.0, 1e-12);
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j) EXPECT_TRUE(cells[i].interior_disjoint(cells[j], 1e-12));
}

TEST(Subdivide, RandomDensitiesGiveUnitCellsWithinSideBounds) {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    int d = 1 + trial % 3;
    ProductDensity pd;
    for (int i = 0; i < d; ++i) {
      pd.a.push_back(rng.uniform(0.0, 0.4));
      pd.w.push_back(rng.uniform(0.3, 2.0));
    }
    double lower = 1.0, upper = 1.0;
    for (double ai : pd.a) {
      lower *= 1.0 - ai;
      upper *= 1.0 + ai;
    }
    std::vector<double> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = rng.uniform(-2.0, 2.0);
      hi[i] = lo[i] + rng.uniform(2.0 / lower + 0.1, d == 3 ? 3.5 / lower : 8.0 / lower);
    }
    Hyperrectangle H = Hyperrectangle::from_bounds(lo, hi);
    // rescale so the total mass is an integer
    double m0 = pd.mass(H);
    pd.scale = std::max(1.0, std::round(m0)) / m0;
    BoundedDensity rho{[&pd](std::span<const double> x) { return pd.value(x); }, lower * pd.scale, upper * pd.scale};
    if (H.side(0) < 2.0 / rho.lower) continue;
    bool fits = true;
    for (int i = 0; i < d; ++i) fits = fits && H.side(i) >= 2.0 / rho.lower;
    if (!fits) continue;
    int face = static_cast<int>(rng.uniform(0.0, 2.0 * d - 1e-9));
    auto cells = subdivide(H, rho, face);
    long mass = std::lround(pd.mass(H));
    ASSERT_EQ(static_cast<long>(cells.size()), mass) << trial;
    auto [smin, smax] = subdivision_side_bounds(d, rho.lower, rho.upper);
    double vol = 0.0;
    int axis = face / 2;
    double face_pos = face % 2 ? H.hi(axis) : H.lo(axis);
    double thickness = -1.0;
    for (auto& c : cells) {
      EXPECT_NEAR(pd.mass(c), 1.0, 1e-9) << trial;
      for (int i = 0; i < d; ++i) {
        EXPECT_GE(c.side(i), smin * (1 - 1e-12)) << trial;
        EXPECT_LE(c.side(i), smax * (1 + 1e-12)) << trial;
      }
      vol += c.volume();
      double touch = face % 2 ? c.hi(axis) : c.lo(axis);
      if (std::abs(touch - face_pos) < 1e-12) {
        if (thickness < 0) thickness = c.side(axis);
        EXPECT_NEAR(c.side(axis), thickness, 1e-9) << trial;
      }
    }
    EXPECT_NEAR(vol, H.volume(), 1e-9 * H.volume()) << trial;
  }
}

TEST(Subdivide, RejectsViolatedHypotheses) {
  auto one = BoundedDensity::constant(1.0);
  EXPECT_THROW(subdivide(box({0.0, 0.0}, {1.5, 4.0}), one, 0), GeometryError);
  EXPECT_THROW(subdivide(box({0.0, 0.0}, {2.5, 2.1}), one, 0), GeometryError);
  EXPECT_THROW(subdivide(box({0.0, 0.0}, {2.0, 3.0}), one, 4), GeometryError);
  BoundedDensity lying{[](std::span<const double> x) { return 1.0 + x[0]; }, 1.0, 1.5};
  EXPECT_THROW(subdivide(box({0.0, 0.0}, {2.0, 2.0}), lying, 0), GeometryError);
}

TEST(BoxMass, MatchesOracle) {
  ProductDensity pd{{0.3, 0.2}, {1.1, 0.7}, 1.0};
  BoundedDensity rho{[&](std::span<const double> x) { return pd.value(x); }, 0.56, 1.56};
  auto B = box({-1.0, 0.5}, {2.7, 3.2});
  EXPECT_NEAR(box_mass(rho, B), pd.mass(B), 1e-12);
}

TEST(Slices, BoundarySliceBeatsTheMean) {
  auto K = box({0.0, 0.0}, {9.0, 12.0});
  auto profile = [](double tau) { return 2.0 + std::sin(3.0 * tau) + 0.1 * tau; };
  auto ch = good_boundary_slice(profile, K, 2.0);
  EXPECT_LE(ch.selected, ch.mean);
  EXPECT_GE(ch.tau, 9.0 - 4.0);
  EXPECT_LT(ch.tau, 9.0 - 2.0);
  double gap = K.lo(0) - ch.slice.lo(0);
  EXPECT_LT(-gap, 2.0 + 1e-12);
  EXPECT_GT(-gap, 1.0 - 1e-12);
  EXPECT_TRUE(K.contains(ch.slice));
  EXPECT_THROW(good_boundary_slice(profile, K, 3.5), DomainError);

  auto vc = good_vertical_slice([](double t) { return 1.0 / t + std::cos(5 * t); }, 4.0, 1);
  EXPECT_GE(vc.t_prime, 2.0);
  EXPECT_LE(vc.t_prime, 4.0);
  EXPECT_LE(vc.selected, vc.mean);
  EXPECT_THROW(good_vertical_slice([](double) { return 0.0; }, 4.0, 0), UnsupportedError);
}

TEST(Crenel, EmptyAndSinglePoint) {
  auto K = Hyperrectangle::cube(v({0.0, 0.0}), 8.0);
  double r1 = 0.5 * crenel_r1_limit(2, 8.0, 0.5, 0.0);
  auto none = crenel_cube(Configuration(2, {}, Configuration::Scale::blown_up), K, r1, 0.5);
  EXPECT_EQ(none.tau, 0.0);
  Configuration on_face(2, {4.0, 1.0}, Configuration::Scale::blown_up);
  auto c = crenel_cube(on_face, K, r1, 0.5);
  EXPECT_GE(point_boundary_distance(c.cube, on_face.point(0)), r1);
  EXPECT_GT(c.tau, 0.0);
}

TEST(Crenel, RandomSeparatedSetsClearBoundary) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    double r0 = 0.5;
    auto K = Hyperrectangle::cube(v({rng.uniform(-1, 1), rng.uniform(-1, 1)}), 8.0);
    auto pts = separated_points(2, K.shrunk(-2.0), r0, 110, rng);
    double r1 = 0.5 * crenel_r1_limit(2, 8.0, r0, 0.001);
    auto c = crenel_cube(pts, K, r1, r0);
    EXPECT_LE(std::abs(c.tau), 1.0);
    double clear = std::numeric_limits<double>::infinity();
    for (int i = 0; i < pts.size(); ++i) {
      auto p = pts.point(i);
      // distance to the boundary of the returned cube, computed face by face
      double dist = std::numeric_limits<double>::infinity();
      for (int ax = 0; ax < 2; ++ax)
        for (double face : {c.cube.lo(ax), c.cube.hi(ax)}) {
          int o = 1 - ax;
          double along = std::clamp(p[o], c.cube.lo(o), c.cube.hi(o));
          dist = std::min(dist, std::hypot(p[ax] - face, p[o] - along));
        }
      clear = std::min(clear, dist);
    }
    EXPECT_GE(clear, r1) << trial;
    EXPECT_NEAR(clear, c.clearance, 1e-12) << trial;
  }
}

TEST(Crenel, InfeasibleAndPackingViolations) {
  // dense points at spacing 0.1 leave no clear boundary position for r1 = 0.2
  std::vector<double> c;
  for (int i = -60; i <= 60; ++i)
    for (int j = -60; j <= 60; ++j) {
      c.push_back(i * 0.1);
      c.push_back(j * 0.1);
    }
  Configuration dense(2, c, Configuration::Scale::blown_up);
  auto K = Hyperrectangle::cube(v({0.0, 0.0}), 8.0);
  EXPECT_THROW(crenel_cube(dense, K, 0.2, 0.1, false), GeometryError);
  EXPECT_THROW(crenel_cube(dense, K, 0.2, 0.1, true), GeometryError);
  EXPECT_THROW(crenel_cube(dense, Hyperrectangle::from_bounds(v({0, 0}), v({1, 2})), 0.01, 0.1, false), GeometryError);
}

TEST(Crenel, DomainBumps) {
  auto K = Hyperrectangle::cube(v({0.0, 0.0}), 6.0);
  Configuration inside(2, {0.0, 0.0, 1.0, 1.0}, Configuration::Scale::blown_up);
  EXPECT_TRUE(crenel_domain(inside, K, 0.5).bumps.empty());
  Configuration face(2, {3.0, 0.0, 0.0, 0.0}, Configuration::Scale::blown_up);
  auto dom = crenel_domain(face, K, 0.5);
  ASSERT_EQ(dom.bumps.size(), 1u);
  EXPECT_EQ(dom.bump_points[0], 0);
  auto outer = Hyperrectangle::cube(v({0.0, 0.0}), 7.0);
  auto inner = Hyperrectangle::cube(v({0.0, 0.0}), 5.0);
  EXPECT_TRUE(outer.contains(dom.bumps[0]));
  EXPECT_TRUE(dom.core.contains(inner));
  // distance from the face charge to the boundary of the union, by sampling the boundary
  double best = std::numeric_limits<double>::infinity();
  auto on_boundary = [&](double x, double y) {
    std::vector<double> p{x, y};
    for (auto* b : {&dom.core, &dom.bumps[0]})
      if (b->contains_closed(p) && b->distance_to_boundary(p) > 1e-9) return false;
    // boundary points shared by the bump and the core interior are not on the union boundary
    bool in_core_interior = std::abs(x) < 3.0 - 1e-9 && std::abs(y) < 3.0 - 1e-9;
    return !in_core_interior;
  };
  for (auto* b : {&dom.core, &dom.bumps[0]})
    for (int k = 0; k <= 4000; ++k) {
      double u = static_cast<double>(k) / 4000;
      double xs[4] = {b->lo(0) + u * b->side(0), b->lo(0) + u * b->side(0), b->lo(0), b->hi(0)};
      double ys[4] = {b->lo(1), b->hi(1), b->lo(1) + u * b->side(1), b->lo(1) + u * b->side(1)};
      for (int e = 0; e < 4; ++e)
        if (on_boundary(xs[e], ys[e])) best = std::min(best, std::hypot(xs[e] - 3.0, ys[e]));
    }
  EXPECT_GE(best, 0.5 / 8.0);
  Configuration close(2, {0.0, 0.0, 0.1, 0.0}, Configuration::Scale::blown_up);
  EXPECT_THROW(crenel_domain(close, K, 0.5), GeometryError);
}

TEST(Regime, WorkedIntervals) {
  ScreeningRegime r;
  r.d = 2;
  r.b = 0.75;
  r.delta = 1.1;
  r.theta = 0.5;
  auto rep = screening_regime_check(r);
  EXPECT_DOUBLE_EQ(rep.b_min, 0.5);
  EXPECT_NEAR(rep.delta_max, 1.125, 1e-15);
  EXPECT_NEAR(rep.theta_lo, (2.2 - 0.75) / 3.0, 1e-15);
  EXPECT_NEAR(rep.theta_hi, 0.75 - 0.2, 1e-15);
  EXPECT_TRUE(rep.pass);
  r.theta = 0.56;
  EXPECT_FALSE(screening_regime_check(r).pass);
  r.b = 0.4;
  r.theta = 0.5;
  EXPECT_FALSE(screening_regime_check(r).checks[0].pass);

  ScreeningRegime r3;
  r3.d = 3;
  r3.b = 0.8;
  r3.delta = 1.01;
  r3.theta = 0.6;
  auto rep3 = screening_regime_check(r3);
  EXPECT_NEAR(rep3.theta_lo, 0.5575, 1e-12);
  EXPECT_NEAR(rep3.theta_hi, 0.77, 1e-12);
  for (int i = 0; i < 20; ++i) {
    double th = rep3.theta_lo + (rep3.theta_hi - rep3.theta_lo) * i / 20.0;
    EXPECT_GE(th, (r3.delta * 3 - r3.b) / 4.0);
    EXPECT_LT(th, r3.b + (1.0 - r3.delta) * 3);
  }
}

TEST(Regime, ExtendedCase) {
  ScreeningRegime r;
  r.d = 1;
  r.k = 1;
  r.gamma = 0.5;
  r.eps2 = 1e-4;
  r.eps1 = 0.2;
  r.L = 2e6;
  auto rep = screening_regime_check(r);
  EXPECT_NEAR(rep.eps1_min, 1.0, 1e-12);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.L_min, std::pow(1e-4, -(1.0 - 0.5 + 1.0) / (2.0 * 0.5)), 1e-6);
  r.eps1 = 1.0;
  EXPECT_TRUE(screening_regime_check(r).pass);
}
