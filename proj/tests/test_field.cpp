#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "riesz/field.hpp"

using namespace riesz;

namespace {

std::vector<double> v(std::initializer_list<double> x) { return x; }

Hyperrectangle box(std::initializer_list<double> lo, std::initializer_list<double> hi) { return Hyperrectangle::from_bounds(v(lo), v(hi)); }

// Field of a uniform density m on [lo, hi] x {0}: -m int grad g(X - (t, 0)) dt, by quadrature.
std::array<double, 2> segment_field(double s, double m, double lo, double hi, double x, double y) {
  auto gx = [&](double t) {
    double dx = x - t;
    double r2 = dx * dx + y * y;
    double f = s == 0.0 ? -1.0 / r2 : -s * std::pow(r2, -0.5 * s - 1.0);
    return std::array<double, 2>{f * dx, f * y};
  };
  std::array<double, 2> e{};
  for (int c = 0; c < 2; ++c) e[c] = -m * oracle::gl([&](double t) { return gx(t)[c]; }, lo, hi, 40, 64);
  return e;
}

// Same for a rectangle in the plane of R^3 (k = 1, d = 2) or R^2 (log2d, y ignored).
std::array<double, 3> rect_field(double s, double m, const double lo[2], const double hi[2], double x0, double x1, double y) {
  std::array<double, 3> e{};
  for (int c = 0; c < 3; ++c) {
    e[c] = -m * oracle::gl([&](double a) {
      return oracle::gl([&](double b) {
        double z[3] = {x0 - a, x1 - b, y};
        double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        double f = s == 0.0 ? -1.0 / r2 : -s * std::pow(r2, -0.5 * s - 1.0);
        return f * z[c];
      }, lo[1], hi[1], 20, 24);
    }, lo[0], hi[0], 20, 24);
  }
  return e;
}

double ext_c2_single(double s, double gamma, double half_width, double t) {
  // |K|^{-1} int_K int_{|y|>t} |y|^gamma |grad r^{-s}|^2 for one charge at the origin, K = [-w, w]
  auto inner = [&](double x) {
    auto f = [&](double u) {
      // y = t / u, dy = t / u^2 du on (0, 1]
      double y = t / u;
      return std::pow(y, gamma) * s * s * std::pow(x * x + y * y, -s - 1.0) * t / (u * u);
    };
    return 2.0 * oracle::gl(f, 0.0, 1.0, 40, 16);
  };
  return oracle::gl(inner, -half_width, half_width, 40, 8) / (2.0 * half_width);
}

}  // namespace

TEST(Field, ChargeFieldIsKernelGradient) {
  auto spec = KernelSpec::riesz(1, 0.5);
  FieldContext ctx(spec, Configuration(1, {0.3}, Configuration::Scale::blown_up), std::nullopt, 0.1);
  XPoint X{1.1, 0.4};
  XPoint z{0.8, 0.4};
  XPoint e = e_at(ctx, X);
  XPoint g = grad_g(spec, z, 2);
  EXPECT_NEAR(e[0], g[0], 1e-14);
  EXPECT_NEAR(e[1], g[1], 1e-14);
  XPoint inside{0.35, 0.02};
  XPoint et = e_eta_at(ctx, inside);
  EXPECT_EQ(et[0], 0.0);
  EXPECT_EQ(et[1], 0.0);
}

TEST(Field, SegmentBackgroundMatchesQuadrature) {
  for (double s : {0.0, 0.4, 0.8}) {
    KernelSpec spec = s == 0.0 ? KernelSpec::log1d() : KernelSpec::riesz(1, s);
    FieldContext ctx(spec, Configuration(1, {}, Configuration::Scale::blown_up), make_uniform_box(box({-1.0}, {2.0}), 0.7), 0.1);
    for (auto [x, y] : {std::pair{0.3, 0.5}, std::pair{-2.0, 0.2}, std::pair{1.9, -1.5}}) {
      XPoint X{x, y};
      XPoint e = e_at(ctx, X);
      auto ref = segment_field(s, 0.7, -1.0, 2.0, x, y);
      EXPECT_NEAR(e[0], ref[0], 1e-8) << s << " " << x;
      EXPECT_NEAR(e[1], ref[1], 1e-8) << s << " " << x;
    }
  }
}

TEST(Field, RectangleBackgroundMatchesQuadrature) {
  double lo[2] = {-1.0, 0.0}, hi[2] = {1.5, 2.0};
  for (double s : {0.0, 0.5, 1.4}) {
    KernelSpec spec = s == 0.0 ? KernelSpec::log2d() : KernelSpec::riesz(2, s);
    FieldContext ctx(spec, Configuration(2, {}, Configuration::Scale::blown_up), make_uniform_box(box({-1.0, 0.0}, {1.5, 2.0}), 1.3), 0.1);
    for (auto p : {std::array<double, 3>{0.2, 2.6, 0.7}, std::array<double, 3>{-2.0, -0.5, 0.3}, std::array<double, 3>{3.0, 1.0, 1.2}}) {
      double y = spec.k == 1 ? p[2] : 0.0;
      XPoint X{p[0], p[1], y};
      XPoint e = e_at(ctx, X);
      auto ref = rect_field(s, 1.3, lo, hi, p[0], p[1], y);
      for (int c = 0; c < spec.ext_dim(); ++c) EXPECT_NEAR(e[c], ref[c], 1e-7 * (1.0 + std::abs(ref[c]))) << s << " comp " << c;
    }
  }
}

TEST(WindowEnergy, LogOneDimensionalMatchesOracle) {
  auto spec = KernelSpec::log1d();
  std::vector<double> pts{0.5, 1.3, 2.6};
  double eta = 0.1;
  FieldContext ctx(spec, Configuration(1, pts, Configuration::Scale::blown_up), make_uniform_box(box({0.0}, {3.0}), 1.0), eta);
  QuadratureGrid g;
  g.window = box({-40.0}, {43.0});
  g.t_max = 200.0;
  auto r = window_energy(ctx, g);
  double ref = oracle::neutral_energy_1d(0.0, spec.csd, 3.0, 1.0, pts, eta);
  EXPECT_NEAR(r.w_eta + r.tail_estimate, ref, 2e-3 * std::abs(ref));
  EXPECT_EQ(r.point_count, 3);
}

TEST(WindowEnergy, RieszOneDimensionalMatchesOracle) {
  for (double s : {0.3, 0.7}) {
    auto spec = KernelSpec::riesz(1, s);
    std::vector<double> pts{0.4, 1.5};
    double eta = 0.15;
    FieldContext ctx(spec, Configuration(1, pts, Configuration::Scale::blown_up), make_uniform_box(box({0.0}, {2.0}), 1.0), eta);
    QuadratureGrid g;
    g.window = box({-30.0}, {32.0});
    g.t_max = 150.0;
    auto r = window_energy(ctx, g);
    double ref = oracle::neutral_energy_1d(s, spec.csd, 2.0, 1.0, pts, eta);
    EXPECT_NEAR(r.w_eta + r.tail_estimate, ref, 2e-3 * std::abs(ref)) << s;
  }
}

TEST(WindowEnergy, LogTwoDimensionalMatchesOracle) {
  auto spec = KernelSpec::log2d();
  std::vector<std::array<double, 2>> pts{{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}, {1.5, 1.5}};
  std::vector<double> co;
  for (auto& p : pts) co.insert(co.end(), p.begin(), p.end());
  double eta = 0.1;
  FieldContext ctx(spec, Configuration(2, co, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {2.0, 2.0}), 1.0), eta);
  QuadratureGrid g;
  g.window = box({-3.0, -3.0}, {5.0, 5.0});
  auto r = window_energy(ctx, g);
  double lo[2] = {0.0, 0.0}, hi[2] = {2.0, 2.0};
  double ref = oracle::neutral_energy_2d(0.0, spec.csd, lo, hi, 1.0, pts, eta);
  EXPECT_NEAR(r.w_eta, ref, 1e-5 * std::abs(ref));
  EXPECT_NEAR(r.smeared_mass, 4.0, 1e-12);
}

TEST(WindowEnergy, AdditiveOverDisjointWindows) {
  auto spec = KernelSpec::log2d();
  std::vector<double> co{0.4, 0.3, 1.6, 0.6, 0.7, 1.4, 1.3, 1.7, 2.5, 0.5, 2.6, 1.5};
  FieldContext ctx(spec, Configuration(2, co, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {3.0, 2.0}), 1.0), 0.12);
  QuadratureGrid g;
  g.window = box({0.0, 0.0}, {3.0, 2.0});
  double whole = window_energy(ctx, g).w_eta;
  g.window = box({0.0, 0.0}, {2.0, 2.0});
  double left = window_energy(ctx, g).w_eta;
  g.window = box({2.0, 0.0}, {3.0, 2.0});
  double right = window_energy(ctx, g).w_eta;
  EXPECT_NEAR(left + right, whole, 1e-4 * std::abs(whole));
}

TEST(WindowEnergy, SelfConvergentUnderRefinement) {
  auto spec = KernelSpec::riesz(1, 0.5);
  std::vector<double> pts{0.5, 1.4, 2.2, 3.5};
  FieldContext ctx(spec, Configuration(1, pts, Configuration::Scale::blown_up), make_uniform_box(box({0.0}, {4.0}), 1.0), 0.1);
  QuadratureGrid g;
  g.window = box({0.0}, {4.0});
  double a = window_energy(ctx, g).w_eta;
  double b = window_energy(ctx, g.refined()).w_eta;
  EXPECT_NEAR(a, b, 1e-2 * std::abs(b));
}

TEST(WindowEnergy, ErrorsOnOverlappingBallsAndCoarseGrids) {
  auto spec = KernelSpec::log2d();
  FieldContext ctx(spec, Configuration(2, {0.5, 0.5, 0.6, 0.5}, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {2.0, 1.0}), 1.0), 0.1);
  QuadratureGrid g;
  g.window = box({0.0, 0.0}, {2.0, 1.0});
  EXPECT_THROW(window_energy(ctx, g), GeometryError);
  FieldContext ok(spec, Configuration(2, {0.5, 0.5, 1.5, 0.5}, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {2.0, 1.0}), 1.0), 0.1);
  g.resolution = 0.01;
  EXPECT_THROW(window_energy(ok, g), NumericError);
  g.resolution = -1.0;
  EXPECT_THROW(window_energy(ok, g), ValidationError);
}

TEST(Profile, SingleChargeVerticalProfile) {
  for (double s : {0.4, 0.8}) {
    auto spec = KernelSpec::riesz(1, s);
    FieldContext ctx(spec, Configuration(1, {0.0}, Configuration::Scale::blown_up), std::nullopt, 0.1);
    std::vector<double> t{0.5, 1.0, 2.0};
    auto prof = vertical_profile(ctx, box({-0.5}, {0.5}), t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double ref = ext_c2_single(s, spec.gamma, 0.5, t[i]);
      EXPECT_NEAR(prof[i], ref, 1e-4 * ref) << s << " t " << t[i];
    }
    EXPECT_GT(prof[0], prof[1]);
    EXPECT_GT(prof[1], prof[2]);
  }
  FieldContext flat(KernelSpec::log2d(), Configuration(2, {0.0, 0.0}, Configuration::Scale::blown_up), std::nullopt, 0.1);
  EXPECT_THROW(vertical_profile(flat, box({-1.0, -1.0}, {1.0, 1.0}), {1.0}), UnsupportedError);
}

TEST(Truncation, DifferenceMatchesSmearedMassIdentity) {
  // separated charges: W_alpha - W_eta = 2 c m n (||f_alpha||_1 - ||f_eta||_1)
  auto spec = KernelSpec::log2d();
  std::vector<double> co{0.5, 0.5, 1.5, 0.5, 0.5, 1.5, 1.5, 1.5};
  FieldContext ctx(spec, Configuration(2, co, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {2.0, 2.0}), 1.0), 0.2);
  QuadratureGrid g;
  auto td = truncation_difference(ctx, box({0.0, 0.0}, {2.0, 2.0}), 0.1, 0.2, g);
  EXPECT_EQ(td.count_pairs, 0);
  EXPECT_EQ(td.points_near, 4);
  double f1 = [](double e) { return std::numbers::pi * e * e / 2.0; }(0.1);
  double f2 = std::numbers::pi * 0.2 * 0.2 / 2.0;
  double ref = 2.0 * spec.csd * 1.0 * 4.0 * (f1 - f2);
  EXPECT_NEAR(td.delta_w, ref, 1e-4 * std::abs(ref));
  EXPECT_LT(td.delta_w, 0.0);
  EXPECT_LE(std::abs(td.delta_w), td.bound_I);
  EXPECT_THROW(truncation_difference(ctx, box({0.0, 0.0}, {1.55, 2.0}), 0.1, 0.2, g), GeometryError);
  EXPECT_THROW(truncation_difference(ctx, box({0.0, 0.0}, {2.0, 2.0}), 0.3, 0.2, g), DomainError);
}

TEST(Rescale, DensityTransport) {
  auto log2 = KernelSpec::log2d();
  auto r = rescale_energy(-3.0, 4.0, 0.1, 2.0, log2);
  EXPECT_NEAR(r.w, -3.0 + log2.csd / 2.0 * 4.0 * 2.0 * std::log(4.0), 1e-12);
  EXPECT_NEAR(r.eta, 0.2, 1e-15);
  EXPECT_NEAR(r.volume, 8.0, 1e-15);
  auto rz = KernelSpec::riesz(1, 0.5);
  auto q = rescale_energy(5.0, 4.0, 0.1, 2.0, rz);
  EXPECT_NEAR(q.w, 5.0 * std::pow(4.0, -0.5), 1e-12);
  EXPECT_NEAR(q.eta, 0.4, 1e-15);
  EXPECT_THROW(rescale_energy(1.0, 0.0, 0.1, 1.0, rz), DomainError);
}

TEST(Rescale, RichardsonRemovesLeadingOrder) {
  // W_eta = W + b eta^2 exactly for separated log2d charges, so the estimate is exact
  auto spec = KernelSpec::log2d();
  std::vector<double> co{0.5, 0.5, 1.5, 0.5, 0.5, 1.5, 1.5, 1.5};
  FieldContext ctx(spec, Configuration(2, co, Configuration::Scale::blown_up), make_uniform_box(box({0.0, 0.0}, {2.0, 2.0}), 1.0), 0.2);
  QuadratureGrid g;
  g.window = box({-3.0, -3.0}, {5.0, 5.0});
  auto est = renormalized_energy_estimate(ctx, g);
  double lo[2] = {0.0, 0.0}, hi[2] = {2.0, 2.0};
  std::vector<std::array<double, 2>> pts{{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}, {1.5, 1.5}};
  // eta -> 0 limit of the oracle: drop the smeared correction
  double limit = oracle::neutral_energy_2d(0.0, spec.csd, lo, hi, 1.0, pts, 1e-9);
  EXPECT_NEAR(est.estimate, limit, 1e-4 * std::abs(limit));
  ASSERT_EQ(est.values.size(), 3u);
}
