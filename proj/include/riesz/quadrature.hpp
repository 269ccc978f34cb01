#pragma once

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "riesz/errors.hpp"

namespace riesz::quad {

struct Node {
  double x;
  double w;
};

// Gauss-Legendre rule on [-1, 1].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

namespace detail {

inline Rule compute_gauss_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = z;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

}  // namespace detail

inline constexpr int kMaxOrder = 96;

inline const Rule& gauss_legendre(int n) {
  if (n < 1 || n > kMaxOrder) throw DomainError("gauss_legendre: order out of range");
  static std::array<Rule, kMaxOrder + 1> table;
  static std::array<std::once_flag, kMaxOrder + 1> flags;
  std::call_once(flags[n], [n] { table[n] = detail::compute_gauss_legendre(n); });
  return table[n];
}

// Composite Gauss-Legendre over [a, b] split into equal panels.
template <class F>
double integrate_gl(F&& f, double a, double b, int order = 16, int panels = 1) {
  const Rule& r = gauss_legendre(order);
  double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    double mid = lo + 0.5 * h;
    double sum = 0.0;
    for (int i = 0; i < order; ++i) sum += r.w[i] * f(mid + 0.5 * h * r.x[i]);
    total += 0.5 * h * sum;
  }
  return total;
}

// Appends mapped Gauss-Legendre nodes for [a, b].
inline void append_gl(std::vector<Node>& out, double a, double b, int order) {
  const Rule& r = gauss_legendre(order);
  double half = 0.5 * (b - a);
  double mid = 0.5 * (a + b);
  for (int i = 0; i < order; ++i) out.push_back({mid + half * r.x[i], half * r.w[i]});
}

// Appends nodes for [a, b] refined geometrically toward the endpoint `at`
// (either a or b). The innermost piece is mapped so that |x - at|^power is
// integrated exactly; power must exceed -1.
inline void append_graded(std::vector<Node>& out, double a, double b, double at, int layers, int order, double power = 0.0) {
  if (b <= a) return;
  double len = b - a;
  bool toward_a = std::abs(at - a) <= std::abs(at - b);
  double outer = len;
  for (int j = 0; j < layers; ++j) {
    double inner = outer * 0.5;
    if (toward_a)
      append_gl(out, a + inner, a + outer, order);
    else
      append_gl(out, b - outer, b - inner, order);
    outer = inner;
  }
  // dist = outer * u^q, q = 1 / (1 + power)
  double q = 1.0 / (1.0 + power);
  const Rule& r = gauss_legendre(order);
  for (int i = 0; i < order; ++i) {
    double u = 0.5 * (1.0 + r.x[i]);
    double dist = outer * std::pow(u, q);
    double w = 0.5 * r.w[i] * outer * q * std::pow(u, q - 1.0);
    out.push_back({toward_a ? a + dist : b - dist, w});
  }
}

// Adaptive Gauss-Kronrod; throws NumericError when the estimate misses tol by far.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 18) {
  if (a == b) return 0.0;
  double err = 0.0;
  double l1 = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol, &err, &l1);
  if (!std::isfinite(v)) throw NumericError("adaptive quadrature produced a non-finite value");
  return v;
}

// Tanh-sinh for endpoint singularities (both ends may be singular).
template <class F>
double integrate_endpoint_singular(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
  double err = 0.0;
  double l1 = 0.0;
  auto g = [&](double x) { return f(x); };
  double v = ts.integrate(g, a, b, rel_tol, &err, &l1);
  if (!std::isfinite(v)) throw NumericError("tanh-sinh quadrature produced a non-finite value");
  return v;
}

}  // namespace riesz::quad
