#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "riesz/background.hpp"
#include "riesz/box.hpp"
#include "riesz/errors.hpp"
#include "riesz/field.hpp"
#include "riesz/geometry.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/random.hpp"

namespace riesz {

struct LinearFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
};

// Ordinary least squares y = slope x + intercept.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  std::size_t n = std::min(x.size(), y.size());
  f.points = static_cast<int>(n);
  if (n < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return f;
}

// Fit of log y against log x over the entries with y > 0.
inline LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  return fit_line(lx, ly);
}

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;
  double cv = 0.0;
  int count = 0;
};

// Sample mean, standard deviation (n - 1) and coefficient of variation |stdev / mean|.
inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stdev = std::sqrt(ss / (v.size() - 1));
  }
  s.cv = s.mean != 0.0 ? std::abs(s.stdev / s.mean) : std::numeric_limits<double>::infinity();
  return s;
}

inline int count_in(const Configuration& c, const Hyperrectangle& K) {
  int n = 0;
  for (int i = 0; i < c.size(); ++i)
    if (K.contains_half_open(c.point(i))) ++n;
  return n;
}

// nu'(K) - int_K m' with half-open counting.
inline double discrepancy(const Configuration& c, const DensityField& m, const Hyperrectangle& K) {
  if (K.dim() != c.d || m.d != c.d) throw DomainError("discrepancy: dimension mismatch");
  if (!m.support.contains_box(K, -1e-12)) throw GeometryError("discrepancy: window leaves the support of the density");
  return count_in(c, K) - m.mass_in(K);
}

struct ScanRow {
  Hyperrectangle window;
  double ell = 0.0;
  int count = 0;
  double discrepancy = 0.0;
  std::optional<WindowEnergyReport> energy;
};

struct ScanResult {
  std::vector<ScanRow> windows;
  Summary summary;  // per-volume energy (equidistribution) or |discrepancy| maxima (discrepancy scan)
  LinearFit fit;
  std::vector<double> ells;
  std::vector<double> values;  // per-ell statistic entering the fit
};

struct CenterGrid {
  double step = 0.5;
  int radius = 2;  // (2 radius + 1)^d centers around the anchor
};

inline std::vector<std::vector<double>> center_grid(std::span<const double> a, const CenterGrid& g) {
  int d = static_cast<int>(a.size());
  int side = 2 * g.radius + 1;
  std::vector<std::vector<double>> out;
  std::vector<int> idx(d, 0);
  while (true) {
    std::vector<double> c(a.begin(), a.end());
    for (int i = 0; i < d; ++i) c[i] += (idx[i] - g.radius) * g.step;
    out.push_back(std::move(c));
    int j = 0;
    while (j < d && ++idx[j] == side) idx[j++] = 0;
    if (j == d) break;
  }
  return out;
}

// Centers on a grid of the given spacing whose cube K_ell lies inside the
// support with the margin, nearest to the support center first.
inline std::vector<std::vector<double>> interior_centers(const DensityField& mu, double ell, double spacing, double margin = 0.0) {
  if (!(ell > 0.0 && spacing > 0.0)) throw DomainError("interior_centers: ell and spacing must be positive");
  Hyperrectangle bb = mu.support.bounding_box();
  int d = mu.d;
  std::vector<int> counts(d);
  for (int i = 0; i < d; ++i) counts[i] = static_cast<int>(std::floor(bb.side(i) / spacing)) + 1;
  std::vector<std::vector<double>> out;
  std::vector<int> idx(d, 0);
  while (true) {
    std::vector<double> c(d);
    for (int i = 0; i < d; ++i) c[i] = bb.center[i] + (idx[i] - 0.5 * (counts[i] - 1)) * spacing;
    if (mu.support.contains_box(Hyperrectangle::cube(c, ell), margin)) out.push_back(c);
    int j = 0;
    while (j < d && ++idx[j] == counts[j]) idx[j++] = 0;
    if (j == d) break;
  }
  auto r2 = [&](const std::vector<double>& c) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (c[i] - bb.center[i]) * (c[i] - bb.center[i]);
    return s;
  };
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return r2(a) < r2(b); });
  return out;
}

// For each ell, max over the center grid of |discrepancy(K_ell(center))|,
// and the log-log fit of that maximum against ell.
inline ScanResult discrepancy_scan(const Configuration& c, const DensityField& m, std::span<const double> a, const std::vector<double>& sizes,
                                   const CenterGrid& grid = {}, double margin = 0.0) {
  ScanResult res;
  auto centers = center_grid(a, grid);
  for (double ell : sizes) {
    if (!(ell > 0.0)) throw DomainError("discrepancy_scan: window sizes must be positive");
    double worst = 0.0;
    for (const auto& ctr : centers) {
      Hyperrectangle K = Hyperrectangle::cube(ctr, ell);
      if (!m.support.contains_box(K, margin)) throw GeometryError("discrepancy_scan: window closer than the margin to the support boundary");
      ScanRow row;
      row.window = K;
      row.ell = ell;
      row.count = count_in(c, K);
      row.discrepancy = row.count - m.mass_in(K);
      worst = std::max(worst, std::abs(row.discrepancy));
      res.windows.push_back(std::move(row));
    }
    res.ells.push_back(ell);
    res.values.push_back(worst);
  }
  res.summary = summarize(res.values);
  res.fit = fit_loglog(res.ells, res.values);
  return res;
}

struct CrenelPolicy {
  bool enabled = true;
  double r1 = 0.0;  // 0: a quarter of eta
  double r0 = 0.0;  // separation used in the packing condition; 0 disables that check
};

// W_eta per unit volume on crenel-adjusted cubes K_ell(center).
inline ScanResult equidistribution_scan(const FieldContext& ctx, const std::vector<std::vector<double>>& centers, double ell,
                                        const QuadratureGrid& grid, const CrenelPolicy& crenel = {}) {
  ScanResult res;
  std::vector<double> per_volume;
  for (const auto& ctr : centers) {
    Hyperrectangle K = Hyperrectangle::cube(ctr, ell);
    if (ctx.background && !ctx.background->support.contains_box(K, -1e-12))
      throw GeometryError("equidistribution_scan: window leaves the support of the background");
    if (crenel.enabled) {
      double r1 = crenel.r1 > 0.0 ? crenel.r1 : 0.25 * ctx.eta;
      K = crenel_cube(ctx.charges, K, r1, crenel.r0, crenel.r0 > 0.0).cube;
    }
    QuadratureGrid g = grid;
    g.window = K;
    ScanRow row;
    row.window = K;
    row.ell = K.side(0);
    row.count = count_in(ctx.charges, K);
    if (ctx.background) row.discrepancy = row.count - ctx.background->mass_in(K);
    row.energy = window_energy(ctx, g);
    per_volume.push_back(row.energy->per_volume);
    res.windows.push_back(std::move(row));
  }
  res.summary = summarize(per_volume);
  res.ells = {ell};
  res.values = per_volume;
  return res;
}

struct NumberVariance {
  double variance = 0.0;
  double mean = 0.0;
  std::vector<int> counts;
  std::vector<std::vector<double>> centers;
};

// Empirical variance of nu'(K_ell(center)) over seeded uniform centers whose
// window lies inside the support with the given margin.
inline NumberVariance number_variance(const Configuration& c, const DensityField& m, double ell, int num_centers, std::uint64_t seed,
                                      double margin = 0.0) {
  if (num_centers < 2) throw DomainError("number_variance: need at least two centers");
  Hyperrectangle bb = m.support.bounding_box();
  int d = c.d;
  for (int i = 0; i < d; ++i)
    if (bb.side(i) <= ell + 2.0 * margin) throw GeometryError("number_variance: no window of this size fits inside the support");
  Rng rng(seed);
  NumberVariance out;
  std::vector<double> x(d);
  const long max_tries = 1000L * num_centers;
  long tries = 0;
  while (static_cast<int>(out.counts.size()) < num_centers) {
    if (++tries > max_tries) throw GeometryError("number_variance: eligible center region is empty");
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(bb.lo(i) + 0.5 * ell, bb.hi(i) - 0.5 * ell);
    Hyperrectangle K = Hyperrectangle::cube(x, ell);
    if (!m.support.contains_box(K, margin)) continue;
    out.counts.push_back(count_in(c, K));
    out.centers.push_back(x);
  }
  std::vector<double> v(out.counts.begin(), out.counts.end());
  Summary s = summarize(v);
  out.mean = s.mean;
  out.variance = s.stdev * s.stdev;
  return out;
}

struct LatticeDecay {
  double exponent = 0.0;
  double constant = 0.0;
  double r2 = 0.0;
  double bound = 0.0;  // -(s - d + 2) + 0.4
  bool within_bound = false;
  std::vector<double> t;
  std::vector<double> c2;
};

// Vertical decay of the neutralized lattice field: unit-spacing charges j in
// [-R, R] minus the uniform background on [-R - 1/2, R + 1/2], C_2 on the
// cell [-1/2, 1/2), then a log-log fit of C_2 against t. Only d = 1.
inline LatticeDecay lattice_decay_fit(const std::vector<std::vector<double>>& basis, const KernelSpec& spec, const std::vector<double>& t_values,
                                      double cell_resolution = 8.0, int radius = 200) {
  if (spec.k != 1) throw UnsupportedError("lattice_decay_fit: needs a kernel with k = 1");
  if (spec.d != 1) throw UnsupportedError("lattice_decay_fit: implemented for d = 1");
  if (basis.size() != 1 || basis[0].size() != 1) throw DomainError("lattice_decay_fit: basis must be 1 x 1 in d = 1");
  if (std::abs(std::abs(basis[0][0]) - 1.0) > 1e-12) throw ValidationError("lattice_decay_fit: lattice must have unit density");
  if (radius < 1) throw DomainError("lattice_decay_fit: radius must be positive");
  double a = std::abs(basis[0][0]);
  double half = (radius + 0.5) * a;
  auto field = [&](const XPoint& X) {
    XPoint e = detail::bg_box_1d(spec, 1.0 / a, -half, half, X);
    double y2 = X[1] * X[1];
    double ex = -0.5 * spec.s - 1.0;
    for (int j = -radius; j <= radius; ++j) {
      double dx = X[0] - j * a;
      double r2 = dx * dx + y2;
      double f = spec.is_log() ? -1.0 / r2 : -spec.s * std::pow(r2, ex);
      e[0] += f * dx;
      e[1] += f * X[1];
    }
    return e;
  };
  ProfileOptions opts;
  opts.resolution = cell_resolution;
  Hyperrectangle cell({0.0}, {0.5 * a});
  LatticeDecay out;
  out.t = t_values;
  out.c2 = vertical_profile(field, 1, spec.gamma, cell, t_values, opts);
  LinearFit f = fit_loglog(out.t, out.c2);
  out.exponent = f.slope;
  out.constant = std::exp(f.intercept);
  out.r2 = f.r2;
  out.bound = -(spec.s - spec.d + 2.0) + 0.4;
  out.within_bound = out.exponent <= out.bound;
  return out;
}

}  // namespace riesz
