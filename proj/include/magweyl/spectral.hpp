#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fields.hpp"
#include "linalg.hpp"
#include "moyal.hpp"
#include "quadrature.hpp"

namespace magweyl {

using window_t = std::pair<double, double>;

struct schrodinger_spec {
  symbol h;
  magnetic_field B = magnetic_field::zero(2);
  std::optional<vector_potential> A;
  scalar_fn V;  // empty: V = 0
  box_grid g;
  interpolation scheme = interpolation::linear;
};

inline bool is_laplacian(const symbol& h) {
  for (const vec& p : symbol::sample_points(h.dim)) {
    double r = 0.0;
    for (int k = 0; k < h.dim; ++k) r += p[k] * p[k];
    if (std::abs(h(p) - r) > 1e-12 * (1 + r)) return false;
  }
  return true;
}

// Op^A(h) + V(Q) on the grid.
inline operator_matrix assemble(const schrodinger_spec& s) {
  if (!s.h.check_elliptic()) throw precondition_error("symbol is not elliptic (no (c, R) bound or bound violated)");
  if (s.h.dim != s.g.dim) throw precondition_error("symbol dimension differs from grid");
  const vector_potential A = s.A ? *s.A : transversal_gauge(s.B);
  auto f = s.h.h;
  operator_matrix M = op_weyl(A, phase_function::momentum(s.g, [f](const vec& p) { return cplx(f(p)); }), -1,
                              s.scheme);
  if (s.V) {
    for (std::size_t i = 0; i < s.g.size(); ++i) {
      const double v = s.V(s.g.node(i));
      if (!std::isfinite(v)) throw precondition_error("potential is not finite on the box");
      M.m(i, i) += v;
    }
  }
  M.mark_hermitian();
  if (!M.hermitian)
    throw numerical_error("assembled operator is not Hermitian (residual " + std::to_string(M.hermiticity_residual()) +
                          ")");
  return M;
}

// ---------------------------------------------------------------- spectra

struct spectrum_result {
  std::string label;
  std::vector<double> values;  // sorted, inside the window
  Eigen::MatrixXcd vectors;    // columns, when requested
  std::vector<double> bulk;    // mass outside the boundary collar, when vectors were computed
  std::optional<box_grid> grid;
  window_t window{0.0, 0.0};
  bool infinite_multiplicity = false;
  double hermiticity_residual = 0.0;

  // Distinct values with their counts (relative tolerance tol).
  std::vector<std::pair<double, int>> multiplicities(double tol = 1e-9) const {
    std::vector<std::pair<double, int>> out;
    for (double v : values) {
      if (!out.empty() && std::abs(v - out.back().first) <= tol * std::max(1.0, std::abs(v)))
        ++out.back().second;
      else
        out.emplace_back(v, 1);
    }
    return out;
  }
};

inline std::size_t eig_cap = 12000;

inline double bulk_mass(const Eigen::VectorXcd& v, const box_grid& g, double collar) {
  double m = 0.0, t = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    const double w = std::norm(v(static_cast<long>(a)));
    t += w;
    if (g.boundary_distance(g.node(a)) > collar) m += w;
  }
  return t > 0 ? m / t : 0.0;
}

// Eigenvalues of M in (lo, hi]; with vectors, bulk scores use the collar width collar_fraction * L.
inline spectrum_result spectrum(const operator_matrix& M, window_t window, bool vectors = false,
                                double collar_fraction = 0.125) {
  if (M.size() > eig_cap)
    throw precondition_error("dimension " + std::to_string(M.size()) + " exceeds the dense cap " +
                             std::to_string(eig_cap) + "; use a windowed iterative solver");
  spectrum_result r;
  r.hermiticity_residual = M.hermiticity_residual();
  if (!M.hermitian || r.hermiticity_residual > 1e-12) throw precondition_error("spectrum needs a Hermitian matrix");
  eig_options o;
  o.window = window;
  o.vectors = vectors;
  auto e = eig(M, o);
  r.values = std::move(e.values);
  r.vectors = std::move(e.vectors);
  r.grid = M.grid;
  r.window = window;
  if (vectors && M.grid)
    for (long i = 0; i < r.vectors.cols(); ++i)
      r.bulk.push_back(bulk_mass(r.vectors.col(i), *M.grid, collar_fraction * M.grid->L));
  return r;
}

struct cluster {
  double center = 0.0;  // median
  double lo = 0.0, hi = 0.0;
  int count = 0;
};

// Groups of bulk eigenvalues separated by more than gap.
inline std::vector<cluster> bulk_clusters(const spectrum_result& s, double theta, double gap, int min_members) {
  std::vector<double> v;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    if (s.bulk.empty() || s.bulk[i] >= theta) v.push_back(s.values[i]);
  std::vector<cluster> out;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i + 1;
    while (j < v.size() && v[j] - v[j - 1] <= gap) ++j;
    if (static_cast<int>(j - i) >= min_members) {
      cluster c;
      c.count = static_cast<int>(j - i);
      c.lo = v[i];
      c.hi = v[j - 1];
      const std::size_t mid = i + (j - i) / 2;
      c.center = (j - i) % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
      out.push_back(c);
    }
    i = j;
  }
  return out;
}

// {(2n + 1)|b| + v} inside the window.
inline spectrum_result landau_oracle(double b, double v, window_t window) {
  if (b == 0.0) throw precondition_error("Landau oracle needs b != 0; the b = 0 spectrum is the band [v, inf)");
  spectrum_result r;
  r.label = "landau";
  r.window = window;
  r.infinite_multiplicity = true;
  for (int n = 0;; ++n) {
    const double e = (2 * n + 1) * std::abs(b) + v;
    if (e > window.second) break;
    if (e >= window.first) r.values.push_back(e);
  }
  return r;
}

// [inf h + v, inf) for continuous elliptic h, as 1001 equispaced points across the window; inf h over the grid.
inline spectrum_result free_oracle(const symbol& h, double v, const box_grid& g, window_t window) {
  spectrum_result r;
  r.label = "free";
  r.window = window;
  r.infinite_multiplicity = true;
  momentum_grid mg(g);
  double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) inf = std::min(inf, h(mg.node(i)));
  const double lo = std::max(window.first, inf + v);
  if (lo > window.second) return r;
  for (int i = 0; i <= 1000; ++i) r.values.push_back(lo + (window.second - lo) * i / 1000.0);
  return r;
}

// ---------------------------------------------------------------- one-variable fields

// Field beta(s) and potential nu(s) depending on x_axis only.
struct fiber_data {
  std::function<double(double)> beta;
  std::function<double(double)> nu;
  int axis = 0;
};

inline fiber_data fiber_of(const asymptotic_pair& p) {
  if (p.variable_axis >= 0 && p.beta) return {p.beta, p.nu, p.variable_axis};
  if (p.constant) {
    const double b = p.b, v = p.v;
    return {[b](double) { return b; }, [v](double) { return v; }, 0};
  }
  throw precondition_error("asymptotic pair '" + p.label + "' is not fiberable");
}

// Checks B(x) = beta(x_axis) on a sample lattice.
inline fiber_data fiber_of(const magnetic_field& B, const scalar_fn& V, int axis, double radius = 10.0) {
  if (B.dim() != 2) throw precondition_error("fibering needs N = 2");
  const int other = 1 - axis;
  for (int i = -8; i <= 8; ++i)
    for (int j = -8; j <= 8; ++j) {
      vec x{}, y{};
      x[axis] = y[axis] = radius * i / 8.0;
      x[other] = radius * j / 8.0;
      y[other] = 0.0;
      if (std::abs(B(x, 0, 1) - B(y, 0, 1)) > 1e-12 || (V && std::abs(V(x) - V(y)) > 1e-12))
        throw precondition_error("field or potential depends on both variables; not fiberable");
    }
  auto beta = [B, axis](double s) {
    vec x{};
    x[axis] = s;
    return B(x, 0, 1);
  };
  std::function<double(double)> nu = [](double) { return 0.0; };
  if (V)
    nu = [V, axis](double s) {
      vec x{};
      x[axis] = s;
      return V(x);
    };
  return {beta, nu, axis};
}

struct fiber_options {
  int k_samples = 64;
  std::optional<std::pair<double, double>> k_range;  // default: gauge component over |s| <= center_fraction * L
  double center_fraction = 0.5;
  double collar_fraction = 0.125;
  double theta = 0.6;
};

struct fibered_result {
  spectrum_result points;                            // union of bulk fiber eigenvalues
  std::vector<std::pair<double, double>> bands;      // [min, max] of the j-th bulk eigenvalue over k
  std::vector<double> ks;
};

namespace detail {

// F(s) = int_0^s (s - u) beta(u) du and A(s) = int_0^s beta(u) du by composite Gauss-Legendre.
inline std::pair<double, double> gauge_primitives(const std::function<double(double)>& beta, double s) {
  const auto& gl = gauss_legendre(8);
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(s) / 0.25)));
  double F = 0.0, A = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = s * p / panels, b = s * (p + 1) / panels;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double u = a + (b - a) * gl.nodes[i];
      const double w = (b - a) * gl.weights[i];
      const double bu = beta(u);
      A += w * bu;
      F += w * (s - u) * bu;
    }
  }
  return {F, A};
}

}  // namespace detail

// Fiber H(k) on the 1D grid in the gauge A_t(s) = +-int_0^s beta, t the invariant direction.
inline Eigen::MatrixXcd fiber_matrix(const fiber_data& f, const symbol& h, const box_grid& g1, double k) {
  const int n = g1.n;
  const double dlt = g1.delta(), L = g1.L;
  const double sign = f.axis == 0 ? 1.0 : -1.0;
  std::vector<double> F(n), A(n), s(n);
  for (int a = 0; a < n; ++a) {
    s[a] = g1.coord(a);
    auto [Fa, Aa] = detail::gauge_primitives(f.beta, s[a]);
    F[a] = sign * Fa;
    A[a] = sign * Aa;
  }
  std::vector<double> pm;
  std::vector<double> wm;
  for (int m = -n / 2; m <= n / 2; ++m) {
    pm.push_back(pi / L * m);
    wm.push_back(std::abs(m) == n / 2 ? 0.5 : 1.0);
  }
  Eigen::MatrixXcd M(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      const double d = s[b] - s[a];
      const double abar = a == b ? A[a] : (F[b] - F[a]) / d;
      const double kappa = k - abar;
      cplx acc = 0.0;
      for (std::size_t m = 0; m < pm.size(); ++m) {
        vec p{};
        p[f.axis] = pm[m];
        p[1 - f.axis] = kappa;
        acc += wm[m] * std::polar(h(p), -pm[m] * d);
      }
      acc *= dlt / (2 * L);
      M(a, b) = acc;
      M(b, a) = std::conj(acc);
    }
  for (int a = 0; a < n; ++a) M(a, a) = M(a, a).real() + (f.nu ? f.nu(s[a]) : 0.0);
  return M;
}

inline fibered_result fibered_spectrum(const fiber_data& f, const symbol& h, const box_grid& g1, window_t window,
                                       const fiber_options& opt = {}) {
  if (h.dim != 2) throw precondition_error("fibered spectra need N = 2");
  if (g1.dim != 1) throw precondition_error("fiber grid must be one-dimensional");
  const double collar = opt.collar_fraction * g1.L;
  std::pair<double, double> kr;
  if (opt.k_range) {
    kr = *opt.k_range;
  } else {
    const double sign = f.axis == 0 ? 1.0 : -1.0;
    kr = {1e300, -1e300};
    for (int i = 0; i <= 64; ++i) {
      const double s = opt.center_fraction * g1.L * (2.0 * i / 64.0 - 1.0);
      const double a = sign * detail::gauge_primitives(f.beta, s).second;
      kr.first = std::min(kr.first, a);
      kr.second = std::max(kr.second, a);
    }
    if (kr.second - kr.first < 1e-9) kr = {-pi / g1.delta(), pi / g1.delta()};
  }
  fibered_result r;
  r.points.label = "fibered";
  r.points.window = window;
  r.points.infinite_multiplicity = true;
  for (int i = 0; i < opt.k_samples; ++i) {
    const double k = opt.k_samples == 1 ? 0.5 * (kr.first + kr.second)
                                        : kr.first + (kr.second - kr.first) * i / (opt.k_samples - 1);
    r.ks.push_back(k);
    auto e = eigh(fiber_matrix(f, h, g1, k), window, true);
    int j = 0;
    for (std::size_t c = 0; c < e.values.size(); ++c) {
      double m = 0.0;
      for (int a = 0; a < g1.n; ++a)
        if (g1.boundary_distance({g1.coord(a), 0, 0}) > collar) m += std::norm(e.vectors(a, static_cast<long>(c)));
      if (m < opt.theta) continue;
      r.points.values.push_back(e.values[c]);
      if (static_cast<int>(r.bands.size()) <= j) r.bands.emplace_back(e.values[c], e.values[c]);
      r.bands[j].first = std::min(r.bands[j].first, e.values[c]);
      r.bands[j].second = std::max(r.bands[j].second, e.values[c]);
      ++j;
    }
  }
  std::sort(r.points.values.begin(), r.points.values.end());
  return r;
}

// ---------------------------------------------------------------- unions and distances

struct union_spectrum {
  std::vector<spectrum_result> components;
  std::vector<double> merged;
  double eps_merge = 1e-6;

  void merge() {
    std::vector<double> all;
    for (const auto& c : components) all.insert(all.end(), c.values.begin(), c.values.end());
    std::sort(all.begin(), all.end());
    merged.clear();
    for (double v : all)
      if (merged.empty() || v - merged.back() > eps_merge) merged.push_back(v);
  }
  std::string report() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "components: " << components.size() << "\neps_merge: " << eps_merge << "\n";
    for (const auto& c : components)
      os << "component " << c.label << ": " << c.values.size() << " points"
         << (c.infinite_multiplicity ? " (infinite multiplicity)" : "") << "\n";
    os << "merged: " << merged.size() << " points\n";
    return os.str();
  }
};

inline double hausdorff(const std::vector<double>& s1, const std::vector<double>& s2, window_t w) {
  auto clip = [&](const std::vector<double>& s) {
    std::vector<double> o;
    for (double v : s)
      if (v >= w.first && v <= w.second) o.push_back(v);
    std::sort(o.begin(), o.end());
    return o;
  };
  const auto a = clip(s1), b = clip(s2);
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return w.second - w.first;
  auto dir = [](const std::vector<double>& x, const std::vector<double>& y) {
    double d = 0.0;
    for (double v : x) {
      auto it = std::lower_bound(y.begin(), y.end(), v);
      double best = std::numeric_limits<double>::infinity();
      if (it != y.end()) best = *it - v;
      if (it != y.begin()) best = std::min(best, v - *(it - 1));
      d = std::max(d, best);
    }
    return d;
  };
  return std::max(dir(a, b), dir(b, a));
}

// Spectra of the asymptotic operators of a descriptor, one component per quasi-orbit sample.
inline union_spectrum asymptotic_spectra(const anisotropy_descriptor& d, const symbol& h, const box_grid& g,
                                         window_t window, const fiber_options& fopt = {}, double eps_merge = 1e-6) {
  union_spectrum u;
  u.eps_merge = eps_merge;
  const box_grid g1(1, g.L, g.n, boundary::truncated);
  for (const auto& p : asymptotic_pairs(d)) {
    spectrum_result s;
    if (p.constant && p.b != 0.0 && is_laplacian(h)) {
      s = landau_oracle(p.b, p.v, window);
    } else if (p.constant && p.b == 0.0) {
      s = free_oracle(h, p.v, g, window);
    } else if (p.constant || p.variable_axis >= 0) {
      s = fibered_spectrum(fiber_of(p), h, g1, window, fopt).points;
    } else {
      schrodinger_spec sp{h, p.field, std::nullopt, p.potential, g};
      s = spectrum(assemble(sp), window, true, fopt.collar_fraction);
      spectrum_result kept = s;
      kept.values.clear();
      for (std::size_t i = 0; i < s.values.size(); ++i)
        if (s.bulk[i] >= fopt.theta) kept.values.push_back(s.values[i]);
      kept.vectors.resize(0, 0);
      s = kept;
    }
    s.label = p.label;
    u.components.push_back(std::move(s));
  }
  u.merge();
  return u;
}

// ---------------------------------------------------------------- finite-volume essential spectrum

struct essential_config {
  double delta_persist = -1;  // default 5e-3 * window length
  double theta_bulk = 0.6;
  double collar_fraction = 0.125;
  bool require_both = true;  // bulk and growing multiplicity; false: either one
  bool ladder_growth = false;  // compare multiplicity on the smallest and largest box instead of neighbours
};

struct essential_level {
  double L = 0.0;
  std::vector<double> kept;
  std::vector<double> rejected_edge, rejected_isolated, rejected_transient;
};

struct essential_result {
  std::vector<essential_level> levels;  // one per box of the ladder
  const std::vector<double>& estimate() const { return levels.back().kept; }
  std::string diagnostics() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& l : levels)
      os << "L " << l.L << ": kept " << l.kept.size() << ", edge " << l.rejected_edge.size() << ", isolated "
         << l.rejected_isolated.size() << ", transient " << l.rejected_transient.size() << "\n";
    return os.str();
  }
};

// Eigenvalues on each box that are bulk, persist on the neighbouring box of the ladder and gain
// multiplicity on the larger of the two.
inline essential_result essential_estimate(const schrodinger_spec& base, const std::vector<box_grid>& ladder,
                                           window_t window, const essential_config& cfg = {}) {
  if (ladder.size() < 2) throw precondition_error("essential estimate needs at least two boxes");
  const double dp = cfg.delta_persist > 0 ? cfg.delta_persist : 5e-3 * (window.second - window.first);
  std::vector<spectrum_result> sp;
  for (const box_grid& g : ladder) {
    schrodinger_spec s = base;
    s.g = g;
    sp.push_back(spectrum(assemble(s), window, true, cfg.collar_fraction));
    sp.back().vectors.resize(0, 0);
  }
  auto count = [&](const std::vector<double>& v, double x) {
    return std::upper_bound(v.begin(), v.end(), x + dp) - std::lower_bound(v.begin(), v.end(), x - dp);
  };
  essential_result r;
  for (std::size_t k = 0; k < sp.size(); ++k) {
    const std::size_t j = k == 0 ? 1 : k - 1;
    const bool larger = ladder[k].L > ladder[j].L;
    essential_level lv;
    lv.L = ladder[k].L;
    for (std::size_t i = 0; i < sp[k].values.size(); ++i) {
      const double x = sp[k].values[i];
      const auto ck = count(sp[k].values, x), cj = count(sp[j].values, x);
      const auto c_small = count(sp.front().values, x), c_large = count(sp.back().values, x);
      const bool bulk = sp[k].bulk[i] >= cfg.theta_bulk;
      const bool growing = cfg.ladder_growth ? c_large > c_small : (larger ? ck > cj : cj > ck);
      if (cj == 0)
        lv.rejected_transient.push_back(x);
      else if (cfg.require_both ? (bulk && growing) : (bulk || growing))
        lv.kept.push_back(x);
      else if (!bulk)
        lv.rejected_edge.push_back(x);
      else
        lv.rejected_isolated.push_back(x);
    }
    r.levels.push_back(std::move(lv));
  }
  return r;
}

// ---------------------------------------------------------------- export

inline void write_spectrum_csv(const spectrum_result& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw precondition_error("cannot write " + path);
  os << std::setprecision(17) << "eigenvalue,multiplicity,bulk\n";
  std::size_t i = 0;
  for (auto [v, m] : s.multiplicities()) {
    double b = 0.0;
    for (int c = 0; c < m; ++c, ++i) b = std::max(b, s.bulk.empty() ? 1.0 : s.bulk[i]);
    os << v << "," << m << "," << b << "\n";
  }
}

inline void write_union_csv(const union_spectrum& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw precondition_error("cannot write " + path);
  os << std::setprecision(17) << "component,value\n";
  for (const auto& c : u.components)
    for (double v : c.values) os << c.label << "," << v << "\n";
}

}  // namespace magweyl
