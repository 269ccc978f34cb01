#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riesz.hpp"

namespace fs = std::filesystem;
using namespace riesz;

namespace {

int log_level() {
  const char* v = std::getenv("RIESZ_LOG");
  if (!v || !*v) return 1;
  std::string s = v;
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void log(int level, const std::string& msg) {
  static const int threshold = log_level();
  if (level <= threshold) std::cerr << "[riesz] " << msg << '\n';
}

struct Run {
  Manifest manifest;
  fs::path out;
  std::string hash;

  std::string file(const std::string& name) const { return (out / name).string(); }
};

KernelSpec kernel_from(const Manifest& m) {
  std::string kind = m.str("model.kernel", "log2d");
  if (kind == "log1d") return KernelSpec::log1d();
  if (kind == "log2d") return KernelSpec::log2d();
  if (kind == "riesz") return KernelSpec::riesz(static_cast<int>(m.integer("model.d", 1)), m.num("model.s"));
  throw ValidationError("model.kernel: expected log1d, log2d or riesz, got '" + kind + "'");
}

GasModel model_from(const Manifest& m) {
  GasModel g;
  g.kernel = kernel_from(m);
  std::string v = m.str("model.potential", "quadratic");
  if (v != "quadratic") throw ValidationError("model.potential: only 'quadratic' (V = a|x|^2) is available");
  g.potential = Potential::quadratic(m.num("model.a", 1.0));
  g.n = static_cast<int>(m.integer("model.n", 100));
  if (g.n < 1) throw ValidationError("model.n must be positive");
  return g;
}

DensityField density_from(const Manifest& m, const GasModel& g) {
  std::string id = m.str("model.density", "equilibrium");
  if (id == "equilibrium") return equilibrium_measure(g);
  if (id == "semicircle") return make_semicircle(m.num("model.radius", 2.0));
  if (id == "uniform-ball") return make_uniform_ball(g.d(), m.num("model.radius", 1.0));
  throw ValidationError("model.density: unknown density '" + id + "'");
}

MinimizeOptions minimize_from(const Manifest& m, std::uint64_t seed) {
  MinimizeOptions o;
  o.max_iters = static_cast<int>(m.integer("minimize.max_iters", o.max_iters));
  o.grad_tol = m.num("minimize.grad_tol", o.grad_tol);
  o.initial_step = m.num("minimize.initial_step", o.initial_step);
  o.restarts = static_cast<int>(m.integer("minimize.restarts", o.restarts));
  o.seed = seed;
  o.validate();
  return o;
}

int cmd_minimize(const Run& run) {
  const Manifest& m = run.manifest;
  GasModel g = model_from(m);
  DensityField mu = density_from(m, g);
  MinimizeOptions o = minimize_from(m, static_cast<std::uint64_t>(m.integer("seed", 0)));
  log(1, "minimize: n = " + std::to_string(g.n) + ", kernel " + g.kernel.name() + ", restarts " + std::to_string(o.restarts));
  MinimizeResult res = minimize_with_restarts(g, mu, o);
  Json extra = Json::object();
  if (g.n >= 2) {
    SeparationReport sep = separation_check(res.config, mu);
    extra["min_separation"] = sep.min_dist;
    extra["normalized_separation"] = sep.normalized;
    extra["w_n"] = split_energy(g, res.config, mu).w_n;
  }

  write_points_csv(run.file("points.csv"), res.config, run.hash);
  CsvWriter trace(run.file("trace.csv"), run.hash);
  trace.header({"iteration", "energy"});
  for (std::size_t i = 0; i < res.trace.size(); ++i) trace.row({static_cast<double>(i), res.trace[i]});

  Json j = {{"command", "minimize"},
            {"manifest", m.to_json()},
            {"model", {{"kernel", g.kernel.name()}, {"d", g.d()}, {"n", g.n}, {"a", g.potential.a}}},
            {"seed", o.seed},
            {"options", {{"max_iters", o.max_iters}, {"grad_tol", o.grad_tol}, {"initial_step", o.initial_step}, {"restarts", o.restarts}}},
            {"final_energy", res.energy},
            {"grad_inf", res.grad_inf},
            {"iterations", res.iterations},
            {"status", to_string(res.status)}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(run.file("manifest.json"), j, run.hash);
  log(1, "minimize: H_n = " + fmt(res.energy) + ", status " + to_string(res.status));
  return 0;
}

// Window centers on a grid with spacing `spacing` inside the support, each window at least `margin` from its boundary.
int cmd_scan(const Run& run, const std::string& points_path) {
  const Manifest& m = run.manifest;
  GasModel g = model_from(m);
  DensityField mu = density_from(m, g);
  Configuration macro = read_points_csv(points_path.empty() ? run.file("points.csv") : points_path, g.d());
  if (macro.size() != g.n) throw ValidationError("scan: points file has " + std::to_string(macro.size()) + " points, model.n = " + std::to_string(g.n));
  auto [micro, mu_micro] = blow_up(macro, mu);
  double margin = m.num("scan.margin", 1.0);
  double minsep = min_separation(micro);
  log(1, "scan: microscale min separation " + fmt(minsep));

  std::vector<double> sizes = m.list("scan.discrepancy_sizes", {2, 3, 4, 6, 8});
  CenterGrid cg{m.num("scan.center_step", 0.5), static_cast<int>(m.integer("scan.center_radius", 2))};
  std::vector<double> anchor = mu_micro.support.bounding_box().center;
  ScanResult disc = discrepancy_scan(micro, mu_micro, anchor, sizes, cg, margin);
  write_json(run.file("discrepancy.json"), {{"command", "scan"}, {"kind", "discrepancy"}, {"result", to_json(disc)}}, run.hash);
  write_scan_csv(run.file("discrepancy.csv"), disc, run.hash);

  double var_ell = m.num("scan.variance_ell", 3.0);
  NumberVariance nv = number_variance(micro, mu_micro, var_ell, static_cast<int>(m.integer("scan.variance_centers", 200)),
                                      static_cast<std::uint64_t>(m.integer("seed", 0)), margin);
  write_json(run.file("variance.json"), {{"command", "scan"}, {"kind", "number_variance"}, {"ell", var_ell}, {"variance", nv.variance}, {"mean", nv.mean}},
             run.hash);

  double ell = m.num("scan.ell", 4.0);
  double eta = m.num("scan.eta_factor", 0.25) * minsep;
  FieldContext ctx(g.kernel, micro, mu_micro, eta);
  QuadratureGrid grid;
  grid.resolution = m.num("scan.resolution", grid.resolution);
  CrenelPolicy crenel;
  crenel.r1 = m.num("scan.crenel_r1", 0.0);
  crenel.r0 = m.flag("scan.crenel_check", false) ? minsep : 0.0;
  auto centers = interior_centers(mu_micro, ell + 1.0, ell + 1.0, margin);
  int max_windows = static_cast<int>(m.integer("scan.max_windows", 9));
  if (static_cast<int>(centers.size()) > max_windows) centers.resize(max_windows);
  if (centers.empty()) throw GeometryError("scan: no interior window of side " + fmt(ell) + " fits");
  log(1, "scan: " + std::to_string(centers.size()) + " windows, eta = " + fmt(eta));
  ScanResult equi = equidistribution_scan(ctx, centers, ell, grid, crenel);
  write_json(run.file("equidistribution.json"), {{"command", "scan"}, {"kind", "equidistribution"}, {"eta", eta}, {"result", to_json(equi)}}, run.hash);
  write_scan_csv(run.file("equidistribution.csv"), equi, run.hash);
  log(1, "scan: CV of per-volume W_eta = " + fmt(equi.summary.cv));
  return 0;
}

int cmd_lattice(const Run& run) {
  const Manifest& m = run.manifest;
  KernelSpec spec = KernelSpec::riesz(1, m.num("lattice.s", 0.5));
  double spacing = m.num("lattice.spacing", 1.0);
  std::vector<double> t = m.list("lattice.t", {0.5, 0.75, 1.0, 1.25, 1.5});
  int radius = static_cast<int>(m.integer("lattice.radius", 200));
  double res = m.num("lattice.resolution", 8.0);
  LatticeDecay fit = lattice_decay_fit({{spacing}}, spec, t, res, radius);
  LatticeDecay twice = lattice_decay_fit({{spacing}}, spec, t, res, 2 * radius);
  Json j = {{"command", "lattice"}, {"s", spec.s}, {"radius", radius}, {"fit", to_json(fit)},
            {"exponent_doubled_radius", twice.exponent}, {"delta_exponent", std::abs(twice.exponent - fit.exponent)}};
  write_json(run.file("lattice.json"), j, run.hash);
  CsvWriter w(run.file("lattice_profile.csv"), run.hash);
  w.header({"t", "C2"});
  for (std::size_t i = 0; i < fit.t.size(); ++i) w.row({fit.t[i], fit.c2[i]});
  log(1, "lattice: exponent " + fmt(fit.exponent) + " (bound " + fmt(fit.bound) + ")");
  return 0;
}

BoundedDensity partition_density(const Manifest& m, int d) {
  std::string id = m.str("partition.density", "uniform");
  if (id == "uniform") return BoundedDensity::constant(m.num("partition.value", 1.0));
  if (id == "wave") {
    double base = m.num("partition.value", 1.0);
    double amp = m.num("partition.amplitude", 0.3);
    if (!(amp >= 0.0 && amp < base)) throw ValidationError("partition.amplitude must lie in [0, value)");
    BoundedDensity rho;
    rho.rho = [base, amp, d](std::span<const double> x) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += x[i];
      return base + amp * std::sin(s);
    };
    rho.lower = base - amp;
    rho.upper = base + amp;
    return rho;
  }
  throw ValidationError("partition.density: expected uniform or wave, got '" + id + "'");
}

int cmd_partition(const Run& run) {
  const Manifest& m = run.manifest;
  std::vector<double> lo = m.list("partition.lo", {0.0, 0.0});
  std::vector<double> hi = m.list("partition.hi", {4.0, 4.0});
  if (lo.size() != hi.size() || lo.empty()) throw ValidationError("partition.lo and partition.hi must have the same nonzero length");
  Hyperrectangle H = Hyperrectangle::from_bounds(lo, hi);
  BoundedDensity rho = partition_density(m, H.dim());
  if (m.flag("partition.normalize", true)) {
    // rescale so the total mass is the nearest positive integer
    double total = box_mass(rho, H);
    double f = std::max(1.0, std::round(total)) / total;
    auto base = rho.rho;
    rho.rho = [base, f](std::span<const double> x) { return f * base(x); };
    rho.lower *= f;
    rho.upper *= f;
  }
  int face = static_cast<int>(m.integer("partition.face", 0));
  auto cells = subdivide(H, rho, face);
  CsvWriter w(run.file("partition.csv"), run.hash);
  std::vector<std::string> cols;
  for (int i = 0; i < H.dim(); ++i) cols.push_back("lo" + std::to_string(i));
  for (int i = 0; i < H.dim(); ++i) cols.push_back("hi" + std::to_string(i));
  cols.push_back("mass");
  w.header(cols);
  for (const auto& c : cells) {
    std::vector<double> row;
    for (int i = 0; i < c.dim(); ++i) row.push_back(c.lo(i));
    for (int i = 0; i < c.dim(); ++i) row.push_back(c.hi(i));
    row.push_back(box_mass(rho, c));
    w.row(row);
  }
  log(1, "partition: " + std::to_string(cells.size()) + " cells");
  return 0;
}

int cmd_regime(const Run& run) {
  const Manifest& m = run.manifest;
  ScreeningRegime r;
  r.d = static_cast<int>(m.integer("regime.d", r.d));
  r.k = static_cast<int>(m.integer("regime.k", r.k));
  r.b = m.num("regime.b", r.b);
  r.delta = m.num("regime.delta", r.delta);
  r.theta = m.num("regime.theta", r.theta);
  r.eps1 = m.num("regime.eps1", r.eps1);
  r.eps2 = m.num("regime.eps2", r.eps2);
  r.L = m.num("regime.L", r.L);
  r.gamma = m.num("regime.gamma", r.gamma);
  r.c0 = m.num("regime.c0", r.c0);
  RegimeReport rep = screening_regime_check(r);
  Json j = {{"command", "regime"},
            {"params", {{"d", r.d}, {"k", r.k}, {"b", r.b}, {"delta", r.delta}, {"theta", r.theta}, {"eps1", r.eps1}, {"eps2", r.eps2}, {"L", r.L}}},
            {"report", to_json(rep)}};
  write_json(run.file("regime.json"), j, run.hash);
  std::cout << (rep.pass ? "pass" : "fail") << " theta in [" << fmt(rep.theta_lo) << ", " << fmt(rep.theta_hi) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riesz gas minimization and next-order diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config, out_dir = ".", points;
  std::vector<std::string> params;
  int threads = 0;
  std::int64_t seed = -1;
  app.add_option("--config", config, "INI-style manifest");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "overrides the manifest seed");
  app.add_option("--set", params, "key=value manifest override, repeatable");

  auto* minimize = app.add_subcommand("minimize", "seeded descent, writes points.csv, trace.csv and manifest.json");
  auto* scan = app.add_subcommand("scan", "discrepancy, number variance and equidistribution scans");
  scan->add_option("--points", points, "points CSV (default OUT/points.csv)");
  auto* lattice = app.add_subcommand("lattice", "vertical decay fit for the 1D lattice");
  auto* partition = app.add_subcommand("partition", "unit-mass subdivision of a box");
  auto* regime = app.add_subcommand("regime", "screening regime validity report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Run run;
    if (!config.empty()) run.manifest = Manifest::load(config);
    for (const auto& p : params) {
      auto eq = p.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + p + "'");
      run.manifest.set(trim(p.substr(0, eq)), trim(p.substr(eq + 1)));
    }
    if (seed >= 0) run.manifest.set("seed", std::to_string(seed));
    run.hash = run.manifest.hash();
    run.out = out_dir;
    fs::create_directories(run.out);
    set_num_threads(threads);
    log(2, "manifest hash " + run.hash);

    if (*minimize) return cmd_minimize(run);
    if (*scan) return cmd_scan(run, points);
    if (*lattice) return cmd_lattice(run);
    if (*partition) return cmd_partition(run);
    if (*regime) return cmd_regime(run);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
