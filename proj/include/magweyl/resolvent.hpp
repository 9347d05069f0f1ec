#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "moyal.hpp"

namespace magweyl {

// Periodic box whose displacement torus carries an integer number k of flux quanta per
// lattice strip, b delta L = 2 pi k; on it the twisted convolution is exactly associative.
inline box_grid flux_torus(int dim, double b, int n, int k = 1) {
  if (b == 0.0) throw precondition_error("flux torus needs a nonzero field");
  return box_grid(dim, std::sqrt(pi * k * n / std::abs(b)), n, boundary::periodic);
}

// Distance of b_jk delta L / 2 pi to the nearest integer, maximized over components.
inline double torus_flux_mismatch(const box_grid& g, const magnetic_field& b) {
  if (!b.is_constant()) return 0.0;
  double worst = 0.0;
  for (double v : b.constant_values()) {
    double t = v * g.delta() * g.L / (2 * pi);
    worst = std::max(worst, std::abs(t - std::round(t)));
  }
  return worst;
}

struct resolvent_config {
  box_grid g;
  double margin = 0.1;
  int max_ladder = 40;
  double neumann_tol = 1e-15;
  int max_terms = 4000;
  double sweep_tol = 0.05;
  int sweep_levels = 4;
  int max_halvings = 12;
  interpolation scheme = interpolation::cubic;
};

inline product_options periodic_product(const resolvent_config& c) {
  product_options o;
  o.scheme = c.scheme;
  o.cocycle_cache = true;
  o.tail_warn = 1e300;
  return o;
}

inline double grid_inf(const symbol& h, const box_grid& g) {
  momentum_grid mg(g);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.size(); ++p) m = std::min(m, h(mg.node(p)));
  return m;
}

// h_a^{-1}(p) = 1 / (h(p) + a), a symbol of type -s.
inline symbol pointwise_inverse(const symbol& h, double a, const box_grid& g) {
  const double inf = grid_inf(h, g);
  if (a < -inf + 1 - 1e-12)
    throw precondition_error("shift a = " + std::to_string(a) + " below -inf h + 1 = " + std::to_string(-inf + 1));
  symbol r;
  r.dim = h.dim;
  r.order = -h.order;
  auto f = h.h;
  r.h = [f, a](const vec& p) { return 1.0 / (f(p) + a); };
  if (h.gradient || h.hessian) {
    symbol hh = h;
    r.gradient = [hh, a](const vec& p) {
      double v = hh(p) + a;
      return (-1.0 / (v * v)) * hh.grad(p);
    };
    r.hessian = [hh, a](const vec& p) {
      double v = hh(p) + a;
      vec g = hh.grad(p);
      auto H = hh.hess(p);
      std::array<vec, 3> out{};
      for (int j = 0; j < hh.dim; ++j)
        for (int k = 0; k < hh.dim; ++k) out[j][k] = 2 * g[j] * g[k] / (v * v * v) - H[j][k] / (v * v);
      return out;
    };
  }
  return r;
}

inline kernel unit_kernel(const box_grid& g) { return kernel::delta(g, 1.0, g.n / 2, true); }

inline kernel momentum_kernel(const box_grid& g, const scalar_fn& f) {
  return partial_fourier_inv(phase_function::momentum(g, [f](const vec& p) { return cplx(f(p)); }));
}

// ---------------------------------------------------------------- defect

struct defect_report {
  double a = 0.0;
  kernel g;  // F^{-1}(h_a o h_a^{-1} - 1)
  double norm = 0.0;
  std::vector<std::pair<double, double>> sweep;  // (cutoff scale, norm)
  bool converged = true;
};

inline double regularized_defect_norm(const symbol& h, double a, const magnetic_field& b, const resolvent_config& c,
                                      double scale, kernel* out = nullptr) {
  const box_grid& g = c.g;
  cutoff_family chi{cutoff_family::variable::momentum};
  auto f = h.h;
  const int dim = g.dim;
  auto cut = [chi, scale, dim](const vec& p) { return chi(vec{}, p, dim, scale); };
  auto ha = phase_function::momentum(g, [&](const vec& p) { return cplx(cut(p) * (f(p) + a)); });
  auto hi = phase_function::momentum(g, [&](const vec& p) { return cplx(cut(p) / (f(p) + a)); });
  moyal_options mo;
  mo.scheme = c.scheme;
  phase_function prod = moyal(ha, hi, b, mo);
  momentum_grid mg(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    double v = cut(mg.node(p));
    prod.at(0, p) -= v * v;
  }
  kernel k = partial_fourier_inv(prod, -1, 0.0);
  double n1 = l1_norm(k);
  if (out) *out = std::move(k);
  return n1;
}

// F^{-1}(h_a o h_a^{-1} - 1) by the product route. The cutoff chi_s(p) doubles from a scale
// well inside the momentum grid until two successive norms agree; once chi_s covers the grid
// the symbols no longer change, so the sweep ends at the grid-regularized defect at the latest.
inline defect_report defect(const symbol& h, double a, const magnetic_field& b, const resolvent_config& c) {
  if (!b.is_constant()) throw precondition_error("defect on the torus needs a constant field");
  pointwise_inverse(h, a, c.g);
  defect_report r;
  r.a = a;
  const double cover = std::sqrt(double(c.g.dim)) * pi / c.g.delta();
  const int cap = c.sweep_levels + 1;
  r.converged = false;
  for (int l = 0; l <= cap && !r.converged; ++l) {
    const double s = cover * std::ldexp(1.0, l - (c.sweep_levels - 1));
    kernel k;
    double v = regularized_defect_norm(h, a, b, c, s, &k);
    if (!r.sweep.empty()) {
      double prev = r.sweep.back().second;
      r.converged = std::abs(v - prev) <= c.sweep_tol * std::max(v, 1e-300) || std::max(v, prev) < 1e-12;
    }
    r.sweep.emplace_back(s, v);
    r.g = std::move(k);
    r.norm = v;
  }
  if (!r.converged) {
    std::ostringstream os;
    os << "cutoff sweep did not settle for a = " << a << ":";
    for (auto [s, v] : r.sweep) os << " (" << s << ", " << v << ")";
    throw numerical_error(os.str());
  }
  return r;
}

struct a0_result {
  double a0 = 0.0;
  std::vector<std::pair<double, double>> ladder;  // (a, defect norm)
};

// Smallest a on the ladder a_s, a_s + 1, a_s + 2, a_s + 4, ... with defect norm < 1 - margin.
inline a0_result find_a0(const symbol& h, const magnetic_field& b, const resolvent_config& c) {
  a0_result r;
  const double start = -grid_inf(h, c.g) + 1;
  for (int k = 0; k < c.max_ladder; ++k) {
    const double a = k == 0 ? start : start + std::ldexp(1.0, k - 1);
    defect_report d = defect(h, a, b, c);
    r.ladder.emplace_back(a, d.norm);
    if (d.norm < 1 - c.margin) {
      r.a0 = a;
      return r;
    }
  }
  std::ostringstream os;
  os << "defect norm stayed above " << 1 - c.margin << " up to a = " << r.ladder.back().first
     << " (last norm " << r.ladder.back().second << "); use a finer grid or raise the ladder cap";
  throw numerical_error(os.str());
}

// ---------------------------------------------------------------- Neumann series

struct neumann_result {
  unitized_kernel inverse;
  int terms = 0;
  double residual = 0.0;  // || u <> inverse - 1 ||
  double bound = 0.0;     // tol / (1 - ||g|| / |mu|)
};

inline unitized_kernel unit_element(const kernel& like) {
  kernel z(like.g, like.m, like.periodic, true);
  return {1.0, z};
}

// (mu + g)^{-1} = mu^{-1} Sum_k (-g / mu)^k, stopped when a term drops below tol.
inline neumann_result neumann_inverse(const unitized_kernel& u, const magnetic_field& b, double tol = 1e-15,
                                      int max_terms = 4000, const product_options& opt = {}) {
  const double gn = l1_norm(u.phi);
  if (std::abs(u.mu) == 0.0 || gn >= std::abs(u.mu))
    throw precondition_error("Neumann series needs ||g|| < |mu| (got " + std::to_string(gn) + " vs " +
                             std::to_string(std::abs(u.mu)) + ")");
  neumann_result r;
  const cplx inv_mu = 1.0 / u.mu;
  kernel step = (-inv_mu) * u.phi;
  kernel term = step;
  kernel sum = term;
  r.terms = 1;
  while (l1_norm(term) >= tol && r.terms < max_terms) {
    term = twisted_product(term, step, b, opt);
    sum += term.resized(sum.m, sum.periodic);
    ++r.terms;
  }
  if (l1_norm(term) >= tol) throw numerical_error("Neumann series did not reach tolerance");
  r.inverse = {inv_mu, inv_mu * sum};
  unitized_kernel check = u.product(r.inverse, b, opt);
  check.mu -= 1.0;
  r.residual = check.norm();
  r.bound = tol / (1 - gn / std::abs(u.mu));
  return r;
}

// ---------------------------------------------------------------- resolvent elements

struct resolvent_element {
  unitized_kernel value;  // scalar part zero
  cplx z;
  double residual = 0.0;       // || F^{-1}((h - z) o Phi) - delta ||_1
  double left_residual = 0.0;  // || F^{-1}(Phi o (h - z)) - delta ||_1
  double lr_discrepancy = 0.0;
  std::vector<cplx> path;
  double norm() const { return value.norm(); }
};

inline std::pair<double, double> identity_residuals(const kernel& kh, const kernel& phi, cplx z,
                                                    const magnetic_field& b, const product_options& opt) {
  kernel delta = unit_kernel(phi.g);
  kernel r = twisted_product(kh, phi, b, opt);
  r -= z * phi;
  r -= delta;
  kernel l = twisted_product(phi, kh, b, opt);
  l -= z * phi;
  l -= delta;
  return {l1_norm(r), l1_norm(l)};
}

// h_a^{(-1)} = h_a^{-1} o (h_a o h_a^{-1})^{(-1)}; the left-sided version is built as well.
inline resolvent_element moyal_inverse(const symbol& h, double a, const magnetic_field& b, const resolvent_config& c) {
  pointwise_inverse(h, a, c.g);
  const product_options opt = periodic_product(c);
  auto f = h.h;
  kernel kha = momentum_kernel(c.g, [f, a](const vec& p) { return f(p) + a; });
  kernel khi = momentum_kernel(c.g, [f, a](const vec& p) { return 1.0 / (f(p) + a); });
  kernel delta = unit_kernel(c.g);

  kernel gr = twisted_product(kha, khi, b, opt) - delta;
  kernel gl = twisted_product(khi, kha, b, opt) - delta;
  auto ur = neumann_inverse({1.0, gr}, b, c.neumann_tol, c.max_terms, opt);
  auto ul = neumann_inverse({1.0, gl}, b, c.neumann_tol, c.max_terms, opt);
  kernel right = khi + twisted_product(khi, ur.inverse.phi, b, opt);
  kernel left = khi + twisted_product(ul.inverse.phi, khi, b, opt);

  resolvent_element r;
  r.z = -a;
  r.value = {0.0, right};
  r.lr_discrepancy = l1_norm(right - left);
  kernel kh = momentum_kernel(c.g, f);
  std::tie(r.residual, r.left_residual) = identity_residuals(kh, right, r.z, b, opt);
  r.path.push_back(r.z);
  return r;
}

// Phi(r_z) by Phi(r_w') = Phi(r_w) o {1 + (w - w') Phi(r_w)}^{(-1)} along the segment from -a0 - 1.
inline resolvent_element resolvent(const symbol& h, const magnetic_field& b, cplx z, const resolvent_config& c,
                                   std::optional<double> a0 = std::nullopt) {
  const double a0v = a0 ? *a0 : find_a0(h, b, c).a0;
  if (z.imag() == 0.0 && z.real() >= -a0v)
    throw precondition_error("real z must lie below -a0 = " + std::to_string(-a0v));
  const product_options opt = periodic_product(c);
  resolvent_element cur = moyal_inverse(h, a0v + 1, b, c);
  cplx w = -a0v - 1;
  std::vector<cplx> path{w};
  while (std::abs(z - w) > 0.0) {
    const double nrm = l1_norm(cur.value.phi);
    double len = std::min(std::abs(z - w), 0.5 / nrm);
    bool done = false;
    for (int halv = 0; halv <= c.max_halvings && !done; ++halv, len *= 0.5) {
      const bool last = len >= std::abs(z - w);
      const cplx next = last ? z : w + len * (z - w) / std::abs(z - w);
      try {
        unitized_kernel u{1.0, (w - next) * cur.value.phi};
        auto inv = neumann_inverse(u, b, c.neumann_tol, c.max_terms, opt);
        kernel phi = cur.value.phi + twisted_product(cur.value.phi, inv.inverse.phi, b, opt);
        cur.value = {0.0, phi};
        w = next;
        path.push_back(w);
        done = true;
      } catch (const precondition_error&) {
      } catch (const numerical_error&) {
      }
    }
    if (!done) throw numerical_error("continuation step failed after maximal halvings");
  }
  cur.z = z;
  cur.path = path;
  kernel kh = momentum_kernel(c.g, h.h);
  std::tie(cur.residual, cur.left_residual) = identity_residuals(kh, cur.value.phi, z, b, opt);
  cur.lr_discrepancy = 0.0;
  return cur;
}

// Phi_{h,V}(r_z) = Phi_h(r_z) o (1 + V Phi_h(r_z))^{(-1)}; V acts as a multiplier in q.
inline resolvent_element resolvent_with_potential(const resolvent_element& base, const scalar_fn& V,
                                                  const magnetic_field& b, const resolvent_config& c,
                                                  const symbol& h) {
  const box_grid& g = c.g;
  const product_options opt = periodic_product(c);
  kernel kv = kernel::multiplier(g, V, g.n / 2, true);
  const double inv = 1.0 / g.cell_volume();
  kv.exact = [V, inv](const vec& q, const vec& x) {
    return (x[0] == 0.0 && x[1] == 0.0 && x[2] == 0.0) ? cplx(V(q) * inv) : cplx{};
  };
  kernel vphi = twisted_product(kv, base.value.phi, b, opt);
  if (l1_norm(vphi) >= 1.0)
    throw numerical_error("||V Phi|| = " + std::to_string(l1_norm(vphi)) + " >= 1; take a larger |Im z|");
  auto u = neumann_inverse({1.0, vphi}, b, c.neumann_tol, c.max_terms, opt);
  kernel phi = base.value.phi + twisted_product(base.value.phi, u.inverse.phi, b, opt);
  resolvent_element r;
  r.z = base.z;
  r.value = {0.0, phi};
  r.path = base.path;
  kernel khv = momentum_kernel(g, h.h).expanded();
  khv += kv;
  std::tie(r.residual, r.left_residual) = identity_residuals(khv, phi, r.z, b, opt);
  return r;
}

// ---------------------------------------------------------------- audits

struct audit_config {
  std::vector<double> a_values;  // empty: 8 doubling steps above a0
  int seminorm_order = 2;
  std::vector<box_grid> seminorm_grids;
  int samples = 200;
  unsigned seed = 7;
};

struct audit_report {
  // (a) polynomial growth of d_q gamma: fitted log-log slope over radii
  std::vector<std::pair<double, double>> gamma_growth;
  double gamma_degree = 0.0;
  // (b) defect scaling
  double mu = 0.0;
  std::vector<std::pair<double, double>> a_ladder, tail_ladder;
  double fitted_exponent = 0.0;
  double tail_exponent = 0.0;  // a far above sup h
  double target_exponent = 0.0;
  double relative_deviation = 0.0;
  // (c) seminorm domination constant per grid, and per test symbol on each grid
  std::vector<double> domination;
  std::vector<std::vector<double>> ratios;

  std::string text() const {
    std::ostringstream os;
    os.precision(17);
    os << "gamma_degree: " << gamma_degree << "\n";
    os << "mu: " << mu << "\nfitted_exponent: " << fitted_exponent << "\ntarget_exponent: " << target_exponent
       << "\nrelative_deviation: " << relative_deviation << "\ntail_exponent: " << tail_exponent << "\n";
    os << "a,defect_l1\n";
    for (auto [a, v] : a_ladder) os << a << "," << v << "\n";
    for (auto [a, v] : tail_ladder) os << a << "," << v << "\n";
    os << "grid,domination_constant\n";
    for (std::size_t i = 0; i < domination.size(); ++i) os << i << "," << domination[i] << "\n";
    return os.str();
  }
};

inline double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (auto [x, y] : pts) {
    if (!(x > 0 && y > 0)) continue;
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// max_{|alpha| <= m} sup_p <p>^{-t+|alpha|} |d^alpha f(p)| on the momentum grid, central differences.
inline double symbol_seminorm(const scalar_fn& f, double t, int m, const box_grid& g) {
  momentum_grid mg(g);
  const double hstep = 1e-3;
  double best = 0.0;
  for (std::size_t pi_ = 0; pi_ < g.size(); ++pi_) {
    const vec p = mg.node(pi_);
    const double jb = japanese_bracket(p, g.dim);
    best = std::max(best, std::pow(jb, -t) * std::abs(f(p)));
    if (m >= 1)
      for (int k = 0; k < g.dim; ++k) {
        vec a = p, b = p;
        a[k] += hstep;
        b[k] -= hstep;
        best = std::max(best, std::pow(jb, -t + 1) * std::abs((f(a) - f(b)) / (2 * hstep)));
      }
    if (m >= 2)
      for (int j = 0; j < g.dim; ++j)
        for (int k = 0; k < g.dim; ++k) {
          auto at = [&](double sj, double sk) {
            vec x = p;
            x[j] += sj * hstep;
            x[k] += sk * hstep;
            return f(x);
          };
          double d2 = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hstep * hstep);
          best = std::max(best, std::pow(jb, -t + 2) * std::abs(d2));
        }
  }
  return best;
}

struct test_symbol {
  scalar_fn f;
  double t;
};

inline std::vector<test_symbol> domination_symbols(int dim) {
  std::vector<test_symbol> s;
  for (double t : {-0.5 - dim, -1.5 - dim, -0.5 * dim - 0.5}) {
    s.push_back({[dim, t](const vec& p) { return std::pow(japanese_bracket(p, dim), t); }, t});
  }
  for (double beta : {0.25, 1.0}) {
    s.push_back({[dim, beta](const vec& p) {
                   double r = 0.0;
                   for (int k = 0; k < dim; ++k) r += p[k] * p[k];
                   return std::exp(-beta * r);
                 },
                 -1.0});
  }
  return s;
}

inline audit_report estimate_audit(const symbol& h, const magnetic_field& b, const resolvent_config& c,
                                   const audit_config& ac = {}) {
  audit_report r;
  const int N = c.g.dim;
  // (a) |d_q gamma^B| growth on spheres of increasing radius
  std::mt19937_64 gen(ac.seed);
  std::normal_distribution<double> nd;
  for (double R : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    double mx = 0.0;
    for (int s = 0; s < ac.samples; ++s) {
      vec pts[3];
      for (auto& v : pts) {
        double nn = 0.0;
        for (int k = 0; k < N; ++k) {
          v[k] = nd(gen);
          nn += v[k] * v[k];
        }
        v = (R / std::sqrt(nn)) * v;
      }
      const double hs = 1e-4;
      for (int k = 0; k < N; ++k) {
        vec qa = pts[0], qb = pts[0];
        qa[k] += hs;
        qb[k] -= hs;
        mx = std::max(mx, std::abs(gamma_b(b, qa, pts[1], pts[2]) - gamma_b(b, qb, pts[1], pts[2])) / (2 * hs));
        vec xa = pts[1], xb = pts[1];
        xa[k] += hs;
        xb[k] -= hs;
        mx = std::max(mx, std::abs(gamma_b(b, pts[0], xa, pts[2]) - gamma_b(b, pts[0], xb, pts[2])) / (2 * hs));
      }
    }
    r.gamma_growth.emplace_back(R, mx);
  }
  r.gamma_degree = loglog_slope(r.gamma_growth);

  // (b) a-scaling of the defect
  r.mu = std::max(1.0, h.order) + 0.1;
  r.target_exponent = -1.0 / r.mu;
  // Default ladder: a competes with h on the grid, a_s + 2^k <= sup h.
  std::vector<double> as = ac.a_values;
  const double start = -grid_inf(h, c.g) + 1;
  double hsup = 0.0;
  {
    momentum_grid mg(c.g);
    for (std::size_t p = 0; p < c.g.size(); ++p) hsup = std::max(hsup, h(mg.node(p)));
  }
  if (as.empty()) {
    for (int k = 0; start + std::ldexp(1.0, k) <= hsup || k < 3; ++k) as.push_back(start + std::ldexp(1.0, k));
  }
  for (double a : as) r.a_ladder.emplace_back(a, defect(h, a, b, c).norm);
  for (int k = 2; k <= 5; ++k) {
    const double a = start + std::ldexp(hsup, k);
    r.tail_ladder.emplace_back(a, defect(h, a, b, c).norm);
  }
  bool all_zero = true;
  for (auto [a, v] : r.a_ladder) all_zero = all_zero && v < 1e-12;
  r.fitted_exponent = all_zero ? 0.0 : loglog_slope(r.a_ladder);
  r.tail_exponent = all_zero ? 0.0 : loglog_slope(r.tail_ladder);
  r.relative_deviation = all_zero ? 0.0 : std::abs(r.fitted_exponent - r.target_exponent) / std::abs(r.target_exponent);

  // (c) ||F^{-1} f||_1 <= c max_{|alpha| <= m} ||f||_{t, alpha}
  std::vector<box_grid> grids = ac.seminorm_grids;
  if (grids.empty()) grids = {box_grid(N, 8.0, 64, boundary::periodic), box_grid(N, 12.0, 128, boundary::periodic)};
  for (const box_grid& g : grids) {
    double cmax = 0.0;
    std::vector<double> rat;
    for (const auto& ts : domination_symbols(N)) {
      kernel k = momentum_kernel(g, ts.f);
      double ratio = l1_norm(k) / symbol_seminorm(ts.f, ts.t, ac.seminorm_order, g);
      rat.push_back(ratio);
      cmax = std::max(cmax, ratio);
    }
    r.ratios.push_back(rat);
    r.domination.push_back(cmax);
  }
  return r;
}

}  // namespace magweyl
