#include <magweyl/dynamics.hpp>
#include <magweyl/resolvent.hpp>
#include <magweyl/scenario.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>

namespace magweyl {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct context {
  const scenario& s;
  const run_options& opt;
  std::filesystem::path dir;
  window_t window;
  run_result result;
  std::ostringstream report;

  context(const scenario& sc, const run_options& o) : s(sc), opt(o) {
    dir = o.out_dir.empty() ? std::filesystem::path(sc.out_dir) : std::filesystem::path(o.out_dir);
    std::filesystem::create_directories(dir);
    window = o.window ? *o.window : sc.window;
    if (!(window.first < window.second)) throw precondition_error("window needs lo < hi");
    report << std::setprecision(17);
    report << "scenario: " << sc.name << "\nexperiment: " << to_string(sc.experiment) << "\nwindow: " << window.first
           << ", " << window.second << "\n";
  }

  void log(const std::string& m) const {
    if (opt.verbose) std::cerr << "[" << to_string(s.experiment) << "] " << m << std::endl;
  }
  void check(const std::string& name, bool pass, const std::string& measured) {
    result.checks.push_back({name, pass, measured, false});
  }
  void info(const std::string& name, const std::string& measured) { result.checks.push_back({name, true, measured, true}); }
  std::string path(const std::string& file) {
    result.artifacts.push_back((dir / file).string());
    return (dir / file).string();
  }
  void finish() {
    report << "checks:\n";
    for (const auto& c : result.checks)
      report << (c.informational ? "INFO" : c.pass ? "PASS" : "FAIL") << " " << c.name << ": " << c.measured << "\n";
    std::ofstream os(path("report.txt"));
    if (!os) throw precondition_error("cannot write report.txt");
    os << report.str();
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_check_algebra(context& c) {
  const scenario& s = c.s;
  const auto B = s.field();
  const auto A = transversal_gauge(B, s.quadrature_order);
  std::mt19937_64 gen(s.seed);
  std::uniform_real_distribution<double> u(-s.draw_radius, s.draw_radius);
  auto draw = [&] {
    vec v{};
    for (int k = 0; k < s.dimension; ++k) v[k] = u(gen);
    return v;
  };
  const int o = s.quadrature_order;
  const auto t0 = std::chrono::steady_clock::now();
  double cocycle = 0.0, stokes = 0.0;
  for (int i = 0; i < s.samples; ++i) {
    const vec q = draw(), x = draw(), y = draw(), z = draw();
    const cplx l = omega_b(B, q, x, y, o) * omega_b(B, q, x + y, z, o);
    const cplx r = omega_b(B, q + x, y, z, o) * omega_b(B, q, x, y + z, o);
    cocycle = std::max(cocycle, std::abs(l - r));
    const cplx st = lambda_a(A, q, x, o) * lambda_a(A, q + x, y, o) / lambda_a(A, q, x + y, o);
    stokes = std::max(stokes, std::abs(omega_b(B, q, x, y, o) - st));
  }
  const double dt = seconds_since(t0);
  c.report << "samples: " << s.samples << "\nquadrature_order: " << o << "\ncocycle_residual: " << cocycle
           << "\nstokes_residual: " << stokes << "\n";
  c.check("cocycle residual", cocycle <= s.tolerance, fmt(cocycle) + " <= " + fmt(s.tolerance));
  c.check("pseudo-trivialization residual", stokes <= s.tolerance, fmt(stokes) + " <= " + fmt(s.tolerance));
  c.info("runtime seconds", fmt(dt));
}

resolvent_config torus_config(const scenario& s, const magnetic_field& B) {
  if (!B.is_constant() || B.is_zero()) throw precondition_error("torus experiments need a nonzero uniform field");
  resolvent_config cfg;
  cfg.g = flux_torus(s.dimension, B.constant_values().front(), s.torus_n, s.flux_quanta);
  return cfg;
}

void run_resolvent(context& c) {
  const scenario& s = c.s;
  const auto B = s.field();
  const auto h = s.hamiltonian_symbol();
  const auto cfg = torus_config(s, B);
  c.log("a0 ladder");
  const auto a0 = find_a0(h, B, cfg);
  c.report << "torus_L: " << cfg.g.L << "\ntorus_n: " << cfg.g.n << "\na0: " << a0.a0 << "\na,defect_l1\n";
  for (auto [a, v] : a0.ladder) c.report << a << "," << v << "\n";
  const cplx z(s.z.first, s.z.second);
  c.log("continuation");
  const auto r = resolvent(h, B, z, cfg, a0.a0);
  c.report << "z: " << z.real() << ", " << z.imag() << "\npath_points: " << r.path.size() << "\nresidual: " << r.residual
           << "\nleft_residual: " << r.left_residual << "\nnorm: " << r.norm() << "\n";
  c.check("right residual", r.residual <= s.tolerance, fmt(r.residual) + " <= " + fmt(s.tolerance));
  c.check("left residual", r.left_residual <= s.tolerance, fmt(r.left_residual) + " <= " + fmt(s.tolerance));
  for (double y : s.sweep) {
    const auto ry = resolvent(h, B, cplx(z.real(), y), cfg, a0.a0);
    const double bound = s.sweep_constant / y;
    c.report << "sweep y " << y << ": " << ry.norm() << "\n";
    c.check("resolvent norm at y = " + fmt(y), ry.norm() <= bound, fmt(ry.norm()) + " <= " + fmt(bound));
  }
}

std::optional<std::vector<double>> expected_levels(const scenario& s, window_t w) {
  if (!s.expect.empty()) return s.expect;
  if (s.field_family == "uniform" && s.dimension == 2 && s.symbol_kind == "laplacian" && s.b[0] != 0.0) {
    const double v = s.potential_kind == "zero" ? 0.0 : s.v_value;
    return landau_oracle(s.b[0], v, w).values;
  }
  return std::nullopt;
}

void run_spectrum(context& c) {
  const scenario& s = c.s;
  const auto t0 = std::chrono::steady_clock::now();
  c.log("assemble");
  const auto M = assemble(s.spec(0));
  c.log("eigensolve, dimension " + std::to_string(M.size()));
  const auto r = spectrum(M, c.window, true, s.collar_fraction);
  write_spectrum_csv(r, c.path("spectrum.csv"));
  const auto cl = bulk_clusters(r, s.bulk_theta, s.cluster_gap, s.min_members);
  std::vector<double> centers;
  c.report << "dimension: " << M.size() << "\neigenvalues_in_window: " << r.values.size()
           << "\nhermiticity_residual: " << r.hermiticity_residual << "\ncluster,center,lo,hi,count\n";
  for (std::size_t i = 0; i < cl.size(); ++i) {
    centers.push_back(cl[i].center);
    c.report << i << "," << cl[i].center << "," << cl[i].lo << "," << cl[i].hi << "," << cl[i].count << "\n";
  }
  if (auto e = expected_levels(s, c.window)) {
    const double d = hausdorff(centers, *e, c.window);
    c.report << "hausdorff_to_expected: " << d << "\n";
    c.check("bulk clusters vs expected levels", d <= s.tolerance, "hausdorff " + fmt(d) + " <= " + fmt(s.tolerance));
  } else {
    c.info("bulk clusters", std::to_string(cl.size()) + " found; no reference levels configured");
  }
  c.info("runtime seconds", fmt(seconds_since(t0)));
}

union_spectrum reference_union(const scenario& s, window_t w) {
  const auto h = s.hamiltonian_symbol();
  const box_grid big = s.grid(s.L.size() - 1);
  const box_grid g(s.dimension, big.L, static_cast<int>(std::lround(s.fiber_points_per_length * big.L)), boundary::truncated);
  fiber_options fo;
  fo.k_samples = s.k_samples;
  if (s.field_family == "bump") throw precondition_error("no asymptotic description for field family 'bump'");
  return asymptotic_spectra(s.descriptor(), h, g, w, fo);
}

void run_ess_spectrum(context& c) {
  const scenario& s = c.s;
  if (s.L.size() < 2) throw precondition_error("ess-spectrum needs a ladder of at least two L values");
  const auto t0 = std::chrono::steady_clock::now();
  essential_config cfg;
  cfg.theta_bulk = s.essential_theta;
  cfg.collar_fraction = s.collar_fraction;
  cfg.require_both = s.require_both;
  cfg.ladder_growth = s.ladder_growth;
  c.log("asymptotic spectra");
  const auto u = reference_union(s, c.window);
  write_union_csv(u, c.path("union.csv"));
  c.log("finite-volume ladder");
  const auto e = essential_estimate(s.spec(0), s.ladder(), c.window, cfg);
  spectrum_result est;
  est.values = e.estimate();
  est.window = c.window;
  write_spectrum_csv(est, c.path("spectrum.csv"));
  c.report << u.report() << e.diagnostics() << "L,hausdorff\n";
  std::vector<double> d;
  for (const auto& lv : e.levels) {
    d.push_back(hausdorff(lv.kept, u.merged, c.window));
    c.report << lv.L << "," << d.back() << "\n";
  }
  bool mono = true;
  std::string seq;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i > 0 && d[i] > d[i - 1]) mono = false;
    seq += (i ? ", " : "") + fmt(d[i]);
  }
  c.check("hausdorff non-increasing along the ladder", mono, seq);
  c.check("hausdorff at the largest box", d.back() <= s.tolerance, fmt(d.back()) + " <= " + fmt(s.tolerance));
  c.info("runtime seconds", fmt(seconds_since(t0)));
}

// Asymptotic operator at the edge the strip points to, for Cartesian scenarios.
std::optional<asymptotic_pair> edge_pair(const scenario& s) {
  if (s.field_family != "cartesian") return std::nullopt;
  const std::string label = std::string("x") + (s.strip_axis == 0 ? "1" : "2") + (s.strip_side > 0 ? "+" : "-");
  for (auto& p : asymptotic_pairs(s.descriptor()))
    if (p.label == label) return p;
  return std::nullopt;
}

void run_propagate(context& c) {
  const scenario& s = c.s;
  const auto t0 = std::chrono::steady_clock::now();
  const energy_window eta(s.eta[0], s.eta[1], s.eta[2], s.eta[3]);
  const box_grid g = s.grid(0);
  const double edge = s.L[0];
  const auto h = s.hamiltonian_symbol();

  if (auto p = edge_pair(s)) {
    const box_grid g1(1, g.L, g.n, boundary::truncated);
    const auto f = fibered_spectrum(fiber_of(*p), h, g1, {std::min(0.0, eta.support_lo), eta.support_hi + 2.0});
    bool gap = true;
    std::string bands;
    for (auto [lo, hi] : f.bands) {
      if (hi >= eta.plateau_lo && lo <= eta.plateau_hi) gap = false;
      bands += (bands.empty() ? "[" : ", [") + fmt(lo) + ", " + fmt(hi) + "]";
    }
    c.report << "edge_operator: " << p->label << "\nedge_bands: " << bands << "\n";
    c.check("eta plateau inside a gap of the " + p->label + " edge operator", gap, "bands " + bands);
  }

  c.log("eigendecomposition, dimension " + std::to_string(g.size()));
  const auto es = eigensystem::of(assemble(s.spec(0)));
  const auto times = transit_times(h, g, eta, s.time_points);
  c.report << "box_half_width: " << g.L << "\nphysical_half_width: " << edge << "\nn: " << g.n
           << "\nhorizon: " << times.back() << "\nwidth,localization_norm,sup_localized_mass\n";
  std::ofstream csv(c.path("propagation.csv"));
  csv << std::setprecision(17) << "width,t,localized_mass\n";
  std::vector<double> norms;
  std::string seq;
  for (double f : s.strip_fractions) {
    const double w = f * edge;
    const auto W = region_window::strip(g, s.strip_axis, s.strip_side, w, edge);
    const auto u = worst_state(W, es, eta);
    const auto r = non_propagation(es, eta, W, u, times);
    for (std::size_t i = 0; i < r.times.size(); ++i) csv << w << "," << r.times[i] << "," << r.mass[i] << "\n";
    c.report << w << "," << r.bound << "," << r.sup << "\n";
    c.check("localization norm, width " + fmt(w), r.bound <= s.tolerance, fmt(r.bound) + " <= " + fmt(s.tolerance));
    c.check("propagated mass bound, width " + fmt(w), r.holds(),
            "sup " + fmt(r.sup) + " <= " + fmt(r.bound) + " + 1e-10");
    seq += (norms.empty() ? "" : ", ") + fmt(r.bound);
    norms.push_back(r.bound);
  }
  bool mono = true;
  for (std::size_t i = 1; i < norms.size(); ++i) mono = mono && norms[i] <= norms[i - 1];
  c.check("localization norm decreases as the strip shrinks", mono, seq);
  c.info("runtime seconds", fmt(seconds_since(t0)));
}

void run_audit(context& c) {
  const scenario& s = c.s;
  const auto B = s.field();
  const auto cfg = torus_config(s, B);
  const auto r = estimate_audit(s.hamiltonian_symbol(), B, cfg);
  c.report << r.text();
  c.check("a-scaling exponent", r.relative_deviation <= s.tolerance,
          "fitted " + fmt(r.fitted_exponent) + " vs " + fmt(r.target_exponent) + ", relative deviation " +
              fmt(r.relative_deviation) + " <= " + fmt(s.tolerance));
  bool finite = true;
  for (double d : r.domination) finite = finite && std::isfinite(d);
  const double spread = r.domination.size() >= 2 ? std::abs(r.domination[0] / r.domination[1] - 1) : 0.0;
  std::string ds;
  for (double d : r.domination) ds += (ds.empty() ? "" : ", ") + fmt(d);
  c.check("seminorm domination constant finite and stable", finite && spread <= s.domination_spread,
          "constants " + ds + ", spread " + fmt(spread) + " <= " + fmt(s.domination_spread));
}

}  // namespace

bool run_result::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const check_result& c) { return c.informational || c.pass; });
}

run_result run_scenario(const scenario& s, const run_options& opt) {
  context c(s, opt);
  switch (s.experiment) {
    case experiment_kind::check_algebra: run_check_algebra(c); break;
    case experiment_kind::resolvent: run_resolvent(c); break;
    case experiment_kind::spectrum: run_spectrum(c); break;
    case experiment_kind::ess_spectrum: run_ess_spectrum(c); break;
    case experiment_kind::propagate: run_propagate(c); break;
    case experiment_kind::audit_estimates: run_audit(c); break;
  }
  c.finish();
  return std::move(c.result);
}

}  // namespace magweyl
