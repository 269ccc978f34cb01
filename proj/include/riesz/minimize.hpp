#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "riesz/errors.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/parallel.hpp"
#include "riesz/random.hpp"

namespace riesz {

namespace detail {

inline double pair_r2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Sum over j > i of g(x_i - x_j) per row, plus the smallest squared distance.
inline double interaction_energy(const KernelSpec& spec, const Configuration& c, double* min_r2 = nullptr) {
  int n = c.size();
  std::vector<double> rows(n, 0.0);
  std::vector<double> mins(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](int i) {
    double acc = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    auto xi = c.point(i);
    for (int j = i + 1; j < n; ++j) {
      double r2 = pair_r2(xi, c.point(j));
      mn = std::min(mn, r2);
      acc += spec.is_log() ? -0.5 * std::log(r2) : std::pow(r2, -0.5 * spec.s);
    }
    rows[i] = acc;
    mins[i] = mn;
  });
  double total = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    total += rows[i];
    mn = std::min(mn, mins[i]);
  }
  if (min_r2) *min_r2 = mn;
  return total;
}

}  // namespace detail

// H_n = sum_{i != j} g(x_i - x_j) + n sum_i V(x_i), ordered pairs.
inline double hamiltonian(const GasModel& model, const Configuration& c) {
  if (c.d != model.d()) throw DomainError("hamiltonian: dimension mismatch");
  double mn = 0.0;
  double pair = detail::interaction_energy(model.kernel, c, &mn);
  if (mn == 0.0) throw DomainError("hamiltonian: coincident points");
  int n = c.size();
  double pot = 0.0;
  for (int i = 0; i < n; ++i) pot += model.potential(c.point(i));
  return 2.0 * pair + n * pot;
}

// dH/dx_i = 2 sum_{j != i} grad g(x_i - x_j) + n grad V(x_i), row-major.
inline std::vector<double> hamiltonian_gradient(const GasModel& model, const Configuration& c) {
  int n = c.size();
  int d = c.d;
  if (d != model.d()) throw DomainError("hamiltonian_gradient: dimension mismatch");
  std::vector<double> g(static_cast<std::size_t>(n) * d, 0.0);
  const KernelSpec& spec = model.kernel;
  bool collision = false;
  parallel_for(n, [&](int i) {
    auto xi = c.point(i);
    double acc[kMaxExtDim] = {0, 0, 0, 0};
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      auto xj = c.point(j);
      double r2 = detail::pair_r2(xi, xj);
      if (r2 == 0.0) {
        collision = true;
        return;
      }
      double f = spec.is_log() ? -1.0 / r2 : -spec.s * std::pow(r2, -0.5 * spec.s - 1.0);
      for (int k = 0; k < d; ++k) acc[k] += f * (xi[k] - xj[k]);
    }
    double gv[kMaxExtDim] = {0, 0, 0, 0};
    model.potential.gradient(xi, std::span<double>(gv, d));
    for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(i) * d + k] = 2.0 * acc[k] + n * gv[k];
  });
  if (collision) throw DomainError("hamiltonian_gradient: coincident points");
  return g;
}

struct MinimizeOptions {
  int max_iters = 20000;
  double grad_tol = 1e-6;
  double shrink = 0.5;
  double armijo = 1e-4;
  double initial_step = 1e-2;  // first trial displacement (max norm); later trials use the Barzilai-Borwein step
  int restarts = 1;
  int memory = 10;  // 1 gives the monotone line search
  std::uint64_t seed = 0;

  void validate() const {
    if (!(grad_tol > 0.0)) throw ValidationError("grad_tol must be positive");
    if (!(shrink > 0.0 && shrink < 1.0)) throw ValidationError("shrink factor must lie in (0, 1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ValidationError("Armijo constant must lie in (0, 1)");
    if (memory < 1) throw ValidationError("line search memory must be at least 1");
    if (max_iters < 0 || restarts < 1) throw ValidationError("max_iters >= 0 and restarts >= 1 required");
  }
};

enum class MinimizeStatus { converged, max_iters, stalled };

inline std::string to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::max_iters: return "max_iters";
    default: return "stalled";
  }
}

struct MinimizeResult {
  Configuration config;
  double energy = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  MinimizeStatus status = MinimizeStatus::max_iters;
  std::vector<double> trace;  // energy after each accepted step (entry 0 = start)
  std::uint64_t seed = 0;
};

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline MinimizeResult local_minimize(const GasModel& model, const Configuration& start, const MinimizeOptions& opts) {
  opts.validate();
  constexpr double kCollision2 = 1e-24;
  constexpr int kMaxHalvings = 60;
  MinimizeResult res;
  res.config = start;
  res.energy = hamiltonian(model, start);
  res.trace.push_back(res.energy);
  std::vector<double> grad = hamiltonian_gradient(model, res.config);
  res.grad_inf = inf_norm(grad);
  double step = opts.initial_step / std::max(1.0, res.grad_inf);
  Configuration trial = res.config;
  int n = start.size();
  double bb_step = std::numeric_limits<double>::quiet_NaN();
  // nonmonotone Armijo reference: max energy over the last opts.memory accepted iterates
  std::deque<double> recent{res.energy};
  for (int it = 0; it < opts.max_iters; ++it) {
    if (res.grad_inf <= opts.grad_tol) {
      res.status = MinimizeStatus::converged;
      return res;
    }
    double g2 = 0.0;
    for (double v : grad) g2 += v * v;
    bool accepted = false;
    double t = std::isfinite(bb_step) && bb_step > 0.0 ? bb_step : step * 2.0;
    for (int h = 0; h <= kMaxHalvings; ++h, t *= opts.shrink) {
      for (std::size_t k = 0; k < grad.size(); ++k) trial.coords[k] = res.config.coords[k] - t * grad[k];
      double mn = 0.0;
      double pair = detail::interaction_energy(model.kernel, trial, &mn);
      if (!(mn > kCollision2)) continue;
      double pot = 0.0;
      for (int i = 0; i < n; ++i) pot += model.potential(trial.point(i));
      double e = 2.0 * pair + n * pot;
      double ref = *std::max_element(recent.begin(), recent.end());
      if (std::isfinite(e) && e <= ref - opts.armijo * t * g2) {
        accepted = true;
        res.energy = e;
        break;
      }
    }
    if (!accepted) {
      res.status = MinimizeStatus::stalled;
      res.iterations = it;
      return res;
    }
    step = t;
    std::swap(res.config.coords, trial.coords);
    res.trace.push_back(res.energy);
    recent.push_back(res.energy);
    if (static_cast<int>(recent.size()) > opts.memory) recent.pop_front();
    std::vector<double> next = hamiltonian_gradient(model, res.config);
    // Barzilai-Borwein trial step for the next line search: <s,s>/<s,y>
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      double sk = -t * grad[k];
      ss += sk * sk;
      sy += sk * (next[k] - grad[k]);
    }
    bb_step = sy > 0.0 ? std::min(ss / sy, 1e3 * t) : std::numeric_limits<double>::quiet_NaN();
    grad = std::move(next);
    res.grad_inf = inf_norm(grad);
    res.iterations = it + 1;
  }
  res.status = res.grad_inf <= opts.grad_tol ? MinimizeStatus::converged : MinimizeStatus::max_iters;
  return res;
}

// n i.i.d. uniform points on the support of mu.
inline Configuration sample_support(const DensityField& mu, int n, Rng& rng) {
  int d = mu.d;
  Hyperrectangle bb = mu.support.bounding_box();
  std::vector<double> coords;
  coords.reserve(static_cast<std::size_t>(n) * d);
  std::vector<double> x(d);
  while (static_cast<int>(coords.size()) < n * d) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(bb.lo(i), bb.hi(i));
    if (mu.support.interior_margin(x) > 0.0) coords.insert(coords.end(), x.begin(), x.end());
  }
  return Configuration(d, std::move(coords), mu.blowup_scale == 1.0 ? Configuration::Scale::macroscopic : Configuration::Scale::blown_up);
}

// Best of opts.restarts descents started from seeded uniform samples of the support.
inline MinimizeResult minimize_with_restarts(const GasModel& model, const DensityField& mu, const MinimizeOptions& opts) {
  opts.validate();
  if (model.n < 1) throw ValidationError("particle number must be positive");
  MinimizeResult best;
  bool have = false;
  for (int r = 0; r < opts.restarts; ++r) {
    std::uint64_t seed = Rng::mix(opts.seed + 0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(r));
    Rng rng(seed);
    Configuration start = sample_support(mu, model.n, rng);
    MinimizeResult res = local_minimize(model, start, opts);
    res.seed = seed;
    if (!have || res.energy < best.energy) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

struct SeparationReport {
  double min_dist = 0.0;
  double normalized = 0.0;
};

// Minimum pair distance and min_dist * (n max m)^{1/d} (macroscopic input) or
// min_dist * (max m')^{1/d} (blown-up input).
inline SeparationReport separation_check(const Configuration& c, const DensityField& mu) {
  int n = c.size();
  if (n < 2) throw DomainError("separation_check: need at least two points");
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) mn = std::min(mn, detail::pair_r2(c.point(i), c.point(j)));
  SeparationReport rep;
  rep.min_dist = std::sqrt(mn);
  double factor = c.scale == Configuration::Scale::macroscopic ? n * mu.m_upper : mu.m_upper;
  rep.normalized = rep.min_dist * std::pow(factor, 1.0 / c.d);
  return rep;
}

struct SplitReport {
  double H_n = 0.0;
  double leading = 0.0;
  double zeta_term = 0.0;
  double log_correction = 0.0;
  double scale = 1.0;
  double w_n = 0.0;

  double reconstructed() const { return leading + zeta_term - log_correction + scale * w_n; }
};

// H_n = n^2 I + 2n sum zeta - (n/d) log n [log kinds] + scale * w_n.
inline SplitReport split_energy(const GasModel& model, const Configuration& c, const DensityField& mu) {
  int n = c.size();
  int d = c.d;
  EffectivePotential zeta_fn(model, mu);
  SplitReport rep;
  rep.H_n = hamiltonian(model, c);
  double nn = n;
  rep.leading = nn * nn * zeta_fn.meanfield_energy();
  std::vector<double> z(n);
  parallel_for(n, [&](int i) { z[i] = zeta_fn(c.point(i)); });
  double zs = 0.0;
  for (double v : z) zs += v;
  rep.zeta_term = 2.0 * nn * zs;
  if (model.kernel.is_log()) {
    rep.log_correction = nn / d * std::log(nn);
    rep.scale = nn;
  } else {
    rep.log_correction = 0.0;
    rep.scale = std::pow(nn, 1.0 + model.kernel.s / d);
  }
  rep.w_n = (rep.H_n - rep.leading - rep.zeta_term + rep.log_correction) / rep.scale;
  return rep;
}

}  // namespace riesz
