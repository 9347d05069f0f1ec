#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "crossed.hpp"
#include "quadrature.hpp"

namespace magweyl {

inline double japanese_bracket(const vec& p, int dim) {
  double s = 1.0;
  for (int k = 0; k < dim; ++k) s += p[k] * p[k];
  return std::sqrt(s);
}

// Real momentum symbol h(p) of declared order s.
struct symbol {
  int dim = 2;
  double order = 0.0;
  scalar_fn h;
  std::optional<std::pair<double, double>> elliptic;  // (c, R): c <p>^s <= h(p) for |p| >= R
  std::function<vec(const vec&)> gradient;
  std::function<std::array<vec, 3>(const vec&)> hessian;

  double operator()(const vec& p) const { return h(p); }

  vec grad(const vec& p) const {
    if (gradient) return gradient(p);
    vec g{};
    const double step = 1e-5 * japanese_bracket(p, dim);
    for (int k = 0; k < dim; ++k) {
      vec a = p, b = p;
      a[k] += step;
      b[k] -= step;
      g[k] = (h(a) - h(b)) / (2 * step);
    }
    return g;
  }

  std::array<vec, 3> hess(const vec& p) const {
    if (hessian) return hessian(p);
    std::array<vec, 3> H{};
    const double step = 1e-3 * japanese_bracket(p, dim);
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        auto at = [&](double sj, double sk) {
          vec x = p;
          x[j] += sj * step;
          x[k] += sk * step;
          return h(x);
        };
        H[j][k] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * step * step);
      }
    return H;
  }

  phase_fn as_phase() const {
    auto f = h;
    return [f](const vec&, const vec& p) { return cplx(f(p)); };
  }

  static std::vector<vec> sample_points(int dim) {
    std::vector<vec> dirs;
    if (dim == 1) {
      dirs = {vec{1, 0, 0}, vec{-1, 0, 0}};
    } else if (dim == 2) {
      for (int a = 0; a < 16; ++a) dirs.push_back(vec{std::cos(a * pi / 8 + 0.1), std::sin(a * pi / 8 + 0.1), 0});
    } else {
      for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
          for (int k = -1; k <= 1; ++k) {
            if (!i && !j && !k) continue;
            double r = std::sqrt(double(i * i + j * j + k * k));
            dirs.push_back(vec{i / r, j / r, k / r});
          }
    }
    std::vector<vec> pts{vec{}};
    for (int e = -3; e <= 10; ++e)
      for (const vec& d : dirs) pts.push_back(std::ldexp(1.0, e) * d);
    return pts;
  }

  struct type_report {
    std::array<double, 3> c{};  // sup |d^alpha h| / <p>^{s - |alpha|} for |alpha| = 0, 1, 2
    bool bounded = true;        // no growth of the ratios over the outer shells
  };

  // Sampled check of |d^alpha h(p)| <= c_alpha <p>^{s - |alpha|}, |alpha| <= 2.
  type_report check_type() const {
    type_report r;
    std::array<std::vector<double>, 3> shell_max;
    const auto pts = sample_points(dim);
    const std::size_t per_shell = dim == 1 ? 2 : dim == 2 ? 16 : 26;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const vec& p = pts[i];
      const double jb = japanese_bracket(p, dim);
      std::array<double, 3> v{};
      v[0] = std::abs(h(p)) / std::pow(jb, order);
      vec g = grad(p);
      auto H = hess(p);
      for (int k = 0; k < dim; ++k) {
        v[1] = std::max(v[1], std::abs(g[k]) / std::pow(jb, order - 1));
        for (int l = 0; l < dim; ++l) v[2] = std::max(v[2], std::abs(H[k][l]) / std::pow(jb, order - 2));
      }
      const std::size_t shell = i == 0 ? 0 : (i - 1) / per_shell + 1;
      for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(v[a])) {
          r.bounded = false;
          continue;
        }
        r.c[a] = std::max(r.c[a], v[a]);
        if (shell_max[a].size() <= shell) shell_max[a].resize(shell + 1, 0.0);
        shell_max[a][shell] = std::max(shell_max[a][shell], v[a]);
      }
    }
    for (int a = 0; a < 3; ++a) {
      const auto& s = shell_max[a];
      if (s.size() < 4) continue;
      double inner = *std::max_element(s.begin(), s.end() - 3);
      double outer = *std::max_element(s.end() - 3, s.end());
      // FD noise dominates second derivatives of large values; allow an absolute floor.
      if (outer > 1.5 * inner + 1e-6) r.bounded = false;
    }
    return r;
  }

  bool check_elliptic() const {
    if (!elliptic) return false;
    auto [c, R] = *elliptic;
    for (const vec& p : sample_points(dim)) {
      double r = 0.0;
      for (int k = 0; k < dim; ++k) r += p[k] * p[k];
      if (std::sqrt(r) < R) continue;
      if (h(p) < c * std::pow(japanese_bracket(p, dim), order) * (1 - 1e-12)) return false;
    }
    return true;
  }

  // <p>^s, elliptic with c = 1, R = 0.
  static symbol japanese(int dim, double s) {
    symbol r;
    r.dim = dim;
    r.order = s;
    r.h = [dim, s](const vec& p) { return std::pow(japanese_bracket(p, dim), s); };
    r.elliptic = std::make_pair(1.0, 0.0);
    return r;
  }
  // |p|^2, elliptic with c = 1/2 beyond R = 1.
  static symbol laplacian(int dim) {
    symbol r;
    r.dim = dim;
    r.order = 2;
    r.h = [dim](const vec& p) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += p[k] * p[k];
      return s;
    };
    r.gradient = [dim](const vec& p) {
      vec g{};
      for (int k = 0; k < dim; ++k) g[k] = 2 * p[k];
      return g;
    };
    r.hessian = [dim](const vec&) {
      std::array<vec, 3> H{};
      for (int k = 0; k < dim; ++k) H[k][k] = 2;
      return H;
    };
    r.elliptic = std::make_pair(0.5, 1.0);
    return r;
  }
};

// chi_n(xi) = chi(xi / n) with a radial quintic smoothstep: 1 on r <= 1, 0 on r >= 2.
struct cutoff_family {
  enum class variable { phase_space, momentum, position };
  variable acts_on = variable::phase_space;

  static double base(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double t = 2.0 - r;
    return std::clamp(t * t * t * (10 - 15 * t + 6 * t * t), 0.0, 1.0);
  }

  double operator()(const vec& q, const vec& p, int dim, double n) const {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      if (acts_on != variable::momentum) s += q[k] * q[k];
      if (acts_on != variable::position) s += p[k] * p[k];
    }
    return base(std::sqrt(s) / n);
  }
};

inline phase_function regularize(const phase_function& f, double n, const cutoff_family& chi = {}) {
  const box_grid& g = f.g;
  const bool keep_q_indep = f.q_independent && chi.acts_on == cutoff_family::variable::momentum;
  phase_function r = keep_q_indep ? f : f.expanded();
  momentum_grid mg(g);
  for (std::size_t q = 0; q < r.slices(); ++q) {
    vec qv = r.q_independent ? vec{} : g.node(q);
    for (std::size_t p = 0; p < g.size(); ++p) r.at(q, p) *= chi(qv, mg.node(p), g.dim, n);
  }
  if (f.fn) {
    auto fn = f.fn;
    const int dim = g.dim;
    r.fn = [fn, chi, n, dim](const vec& q, const vec& p) { return chi(q, p, dim, n) * fn(q, p); };
  }
  return r;
}

inline phase_function involution(const phase_function& f) {
  phase_function r = f;
  for (auto& v : r.data) v = std::conj(v);
  if (f.fn) {
    auto fn = f.fn;
    r.fn = [fn](const vec& q, const vec& p) { return std::conj(fn(q, p)); };
  }
  return r;
}

struct moyal_options {
  int m = -1;  // displacement half-range of the kernels; -1 keeps the full period
  interpolation scheme = interpolation::cubic;
  int quad_order = 8;
  std::vector<std::string>* warnings = nullptr;
};

// f o g = F[ F^{-1} f <> F^{-1} g ]
inline phase_function moyal(const phase_function& f, const phase_function& g, const magnetic_field& b,
                            const moyal_options& opt = {}) {
  if (!(f.g == g.g)) throw precondition_error("symbol grids differ");
  kernel kf = partial_fourier_inv(f, opt.m), kg = partial_fourier_inv(g, opt.m);
  product_options po;
  po.scheme = opt.scheme;
  po.quad_order = opt.quad_order;
  po.cocycle_cache = true;
  if (opt.m >= 0) po.m_out = std::min(opt.m, f.g.n / 2);
  kernel k = twisted_product(kf, kg, b, po);
  if (opt.warnings) opt.warnings->insert(opt.warnings->end(), k.warnings.begin(), k.warnings.end());
  for (const cplx& v : k.data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw numerical_error("non-finite kernel in product");
  return partial_fourier(k);
}

// ---------------------------------------------------------------- direct oracle

// Tensor Gauss-Legendre setup for the oscillatory integral; f and g must vanish
// (to working precision) for |q_k| > q_radius or |p_k| > p_radius.
struct direct_quadrature {
  double q_radius = 6.0;
  double p_radius = 6.0;
  int order = 8;
  int panels = 6;
  int omega_order = 8;
  std::size_t budget = 50'000'000;  // cap on (x, y) node pairs
};

namespace detail {
inline void composite_rule(double lo, double hi, int panels, int order, std::vector<double>& x,
                           std::vector<double>& w) {
  const gauss_rule& r = gauss_legendre(order);
  const double h = (hi - lo) / panels;
  x.clear();
  w.clear();
  for (int k = 0; k < panels; ++k)
    for (int i = 0; i < r.order(); ++i) {
      x.push_back(lo + h * (k + r.nodes[i]));
      w.push_back(h * r.weights[i]);
    }
}

// Per-axis contraction v[.., y_a, ..] = Sum_k E_a(k, y_a) v[.., k, ..] in place.
inline void contract_axes(std::vector<cplx>& v, const std::vector<Eigen::MatrixXcd>& E, int dim, int M) {
  std::vector<cplx> tmp(v.size());
  std::size_t stride = 1;
  for (int a = 0; a < dim; ++a) {
    const std::size_t outer = v.size() / (stride * M);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t s = 0; s < stride; ++s) {
        const std::size_t base = o * stride * M + s;
        for (int y = 0; y < M; ++y) {
          cplx acc{};
          for (int k = 0; k < M; ++k) acc += E[a](k, y) * v[base + k * stride];
          tmp[base + y * stride] = acc;
        }
      }
    v.swap(tmp);
    stride *= M;
  }
}
}  // namespace detail

// [f o g](q, p) = pi^{-2N} Int dx dk dy dl e^{-2i(k.y - l.x)} omega(q-x-y; 2x, 2(y-x)) f(q-x, p-k) g(q-y, p-l)
inline cplx moyal_direct(const phase_fn& f, const phase_fn& g, const magnetic_field& b, const vec& q, const vec& p,
                         const direct_quadrature& quad = {}) {
  const int N = b.dim();
  const int M = quad.order * quad.panels;
  std::size_t nodes = 1;
  for (int a = 0; a < N; ++a) nodes *= M;
  if (nodes * nodes > quad.budget)
    throw numerical_error("direct quadrature needs " + std::to_string(nodes) + " x " + std::to_string(nodes) +
                          " node pairs (" + std::to_string(M) + " per axis, dimension " + std::to_string(N) +
                          "), budget " + std::to_string(quad.budget));

  // x and y share the node set around q; k and l share the one around p.
  std::vector<std::vector<double>> xs(N), xw(N), ks(N), kw(N);
  for (int a = 0; a < N; ++a) {
    detail::composite_rule(q[a] - quad.q_radius, q[a] + quad.q_radius, quad.panels, quad.order, xs[a], xw[a]);
    detail::composite_rule(p[a] - quad.p_radius, p[a] + quad.p_radius, quad.panels, quad.order, ks[a], kw[a]);
  }
  auto node = [&](const std::vector<std::vector<double>>& s, std::size_t idx, double& w,
                  const std::vector<std::vector<double>>& ws) {
    vec v{};
    w = 1.0;
    for (int a = 0; a < N; ++a) {
      std::size_t i = idx % M;
      idx /= M;
      v[a] = s[a][i];
      w *= ws[a][i];
    }
    return v;
  };
  std::vector<Eigen::MatrixXcd> Ef(N), Eg(N);
  for (int a = 0; a < N; ++a) {
    Ef[a].resize(M, M);
    Eg[a].resize(M, M);
    for (int k = 0; k < M; ++k)
      for (int y = 0; y < M; ++y) {
        Ef[a](k, y) = std::polar(1.0, -2 * ks[a][k] * xs[a][y]);
        Eg[a](k, y) = std::polar(1.0, 2 * ks[a][k] * xs[a][y]);
      }
  }

  // If[x][y] = Sum_k w_k e^{-2ik.y} f(q-x, p-k);  Ig[y][x] = Sum_l w_l e^{2il.x} g(q-y, p-l)
  std::vector<cplx> If(nodes * nodes), Ig(nodes * nodes);
  bool bad = false;
#pragma omp parallel for schedule(dynamic)
  for (long xi = 0; xi < static_cast<long>(nodes); ++xi) {
    double wx;
    vec x = node(xs, xi, wx, xw);
    std::vector<cplx> vf(nodes), vg(nodes);
    for (std::size_t ki = 0; ki < nodes; ++ki) {
      double wk;
      vec k = node(ks, ki, wk, kw);
      cplx a = f(q - x, p - k), c = g(q - x, p - k);
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || !std::isfinite(c.real()) ||
          !std::isfinite(c.imag()))
        bad = true;
      vf[ki] = wk * a;
      vg[ki] = wk * c;
    }
    detail::contract_axes(vf, Ef, N, M);
    detail::contract_axes(vg, Eg, N, M);
    std::copy(vf.begin(), vf.end(), If.begin() + xi * nodes);
    std::copy(vg.begin(), vg.end(), Ig.begin() + xi * nodes);
  }
  if (bad) throw evaluation_error("non-finite symbol value in direct quadrature");

  const bool zero = b.is_zero();
  cplx total{};
#pragma omp parallel
  {
    cplx local{};
#pragma omp for schedule(dynamic)
    for (long xi = 0; xi < static_cast<long>(nodes); ++xi) {
      double wx;
      vec x = node(xs, xi, wx, xw);
      for (std::size_t yi = 0; yi < nodes; ++yi) {
        double wy;
        vec y = node(xs, yi, wy, xw);
        cplx w = zero ? cplx(1.0) : omega_b(b, q - x - y, 2.0 * x, 2.0 * (y - x), quad.omega_order);
        local += wx * wy * w * If[xi * nodes + yi] * Ig[yi * nodes + xi];
      }
    }
#pragma omp critical(magweyl_direct_sum)
    total += local;
  }
  return total * std::pow(pi, -2.0 * N);
}

}  // namespace magweyl
