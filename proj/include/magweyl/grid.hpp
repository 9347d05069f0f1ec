#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "types.hpp"

namespace magweyl {

enum class boundary { truncated, periodic };

using index3 = std::array<int, 3>;

// Cell-centred nodes x_i = -L + (i + 1/2) delta on [-L, L]^N.
struct box_grid {
  int dim = 2;
  double L = 1.0;
  int n = 8;
  boundary bc = boundary::truncated;

  box_grid() = default;
  box_grid(int dim_, double L_, int n_, boundary bc_ = boundary::truncated) : dim(dim_), L(L_), n(n_), bc(bc_) {
    if (dim < 1 || dim > 3) throw precondition_error("grid dimension must be 1, 2 or 3");
    if (n < 2 || n % 2) throw precondition_error("points per axis must be even");
    if (!(L > 0)) throw precondition_error("half-width must be positive");
  }

  double delta() const { return 2 * L / n; }
  double cell_volume() const { return std::pow(delta(), dim); }
  std::size_t size() const {
    std::size_t s = 1;
    for (int k = 0; k < dim; ++k) s *= n;
    return s;
  }
  double coord(int i) const { return -L + (i + 0.5) * delta(); }

  index3 unravel(std::size_t idx) const {
    index3 i{0, 0, 0};
    for (int k = 0; k < dim; ++k) {
      i[k] = static_cast<int>(idx % n);
      idx /= n;
    }
    return i;
  }
  std::size_t ravel(const index3& i) const {
    std::size_t idx = 0;
    for (int k = dim - 1; k >= 0; --k) idx = idx * n + i[k];
    return idx;
  }
  vec node(std::size_t idx) const {
    index3 i = unravel(idx);
    vec x{};
    for (int k = 0; k < dim; ++k) x[k] = coord(i[k]);
    return x;
  }
  double boundary_distance(const vec& x) const {
    double d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dim; ++k) d = std::min(d, L - std::abs(x[k]));
    return d;
  }
  bool operator==(const box_grid& o) const { return dim == o.dim && L == o.L && n == o.n; }
};

// Dual lattice: p_m = (pi/L) m, m = -n/2 .. n/2-1, stored at m + n/2.
struct momentum_grid {
  box_grid g;
  explicit momentum_grid(const box_grid& b) : g(b) {}
  double spacing() const { return pi / g.L; }
  double coord(int i) const { return spacing() * (i - g.n / 2); }
  // weight of one momentum cell in the normalized measure dp/(2 pi)^N
  double cell_weight() const { return std::pow(1.0 / (2 * g.L), g.dim); }
  vec node(std::size_t idx) const {
    index3 i = g.unravel(idx);
    vec p{};
    for (int k = 0; k < g.dim; ++k) p[k] = coord(i[k]);
    return p;
  }
};

using phase_fn = std::function<cplx(const vec& q, const vec& p)>;
using kernel_fn = std::function<cplx(const vec& q, const vec& x)>;

// f(q, p) sampled on BoxGrid x MomentumGrid. A q-independent function stores one slice.
// When built from a callable, fn is kept so kernels can be sampled off the node lattice.
struct phase_function {
  box_grid g;
  bool q_independent = false;
  std::vector<cplx> data;  // [q][p]
  phase_fn fn;

  std::size_t slices() const { return q_independent ? 1 : g.size(); }
  cplx& at(std::size_t q, std::size_t p) { return data[(q_independent ? 0 : q) * g.size() + p]; }
  cplx at(std::size_t q, std::size_t p) const { return data[(q_independent ? 0 : q) * g.size() + p]; }

  static phase_function sample(const box_grid& g, const phase_fn& f, bool q_independent = false) {
    phase_function r{g, q_independent, {}, f};
    momentum_grid mg(g);
    r.data.resize(r.slices() * g.size());
    for (std::size_t q = 0; q < r.slices(); ++q) {
      vec qv = q_independent ? vec{} : g.node(q);
      for (std::size_t p = 0; p < g.size(); ++p) {
        cplx v = f(qv, mg.node(p));
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw evaluation_error("non-finite symbol value");
        r.data[q * g.size() + p] = v;
      }
    }
    return r;
  }
  static phase_function momentum(const box_grid& g, const std::function<cplx(const vec&)>& h) {
    return sample(g, [h](const vec&, const vec& p) { return h(p); }, true);
  }
  phase_function expanded() const {
    if (!q_independent) return *this;
    phase_function r{g, false, {}, fn};
    r.data.resize(g.size() * g.size());
    for (std::size_t q = 0; q < g.size(); ++q) std::copy(data.begin(), data.end(), r.data.begin() + q * g.size());
    return r;
  }
};

// phi(q; x) on node q and displacement x = j delta. Displacements either cover the
// full torus of period 2L (periodic, j in [-n/2, n/2)) or |j_k| <= m with linear arithmetic.
struct kernel {
  box_grid g;
  int m = 0;
  bool periodic = false;
  bool q_independent = false;
  std::vector<cplx> data;  // [q][displacement]
  kernel_fn exact;         // optional closed form, used for off-lattice q
  std::vector<cplx> half;  // optional exact samples on the half-step q lattice: [h][displacement]
  double tail_mass = 0.0;  // L1 mass dropped by truncation
  std::vector<std::string> warnings;

  kernel() = default;
  kernel(const box_grid& grid, int m_, bool periodic_, bool q_indep)
      : g(grid), m(periodic_ ? grid.n / 2 : m_), periodic(periodic_), q_independent(q_indep) {
    if (!periodic && m > grid.n) throw precondition_error("displacement range exceeds 2L");
    data.assign(slices() * disp_size(), cplx{});
  }

  int lo() const { return periodic ? -g.n / 2 : -m; }
  int per_axis() const { return periodic ? g.n : 2 * m + 1; }
  std::size_t disp_size() const {
    std::size_t s = 1;
    for (int k = 0; k < g.dim; ++k) s *= per_axis();
    return s;
  }
  std::size_t slices() const { return q_independent ? 1 : g.size(); }
  double radius() const { return m * g.delta(); }
  // Half-step q positions per axis: -L + (h/2 + 1/2) delta, h = 0 .. 2n-2 (2n on a periodic box).
  int half_axis() const { return g.bc == boundary::periodic ? 2 * g.n : 2 * g.n - 1; }
  std::size_t half_rows() const {
    std::size_t s = 1;
    for (int k = 0; k < g.dim; ++k) s *= half_axis();
    return s;
  }

  index3 disp_unravel(std::size_t d) const {
    index3 j{0, 0, 0};
    for (int k = 0; k < g.dim; ++k) {
      j[k] = static_cast<int>(d % per_axis()) + lo();
      d /= per_axis();
    }
    return j;
  }
  // Maps an integer displacement to its stored slot; -1 when outside the range.
  long disp_ravel(index3 j) const {
    long d = 0;
    for (int k = g.dim - 1; k >= 0; --k) {
      int v = j[k];
      if (periodic) {
        v = ((v - lo()) % g.n + g.n) % g.n;
      } else {
        if (v < -m || v > m) return -1;
        v -= lo();
      }
      d = d * per_axis() + v;
    }
    return d;
  }
  // Representative displacement vector of a (possibly wrapped) integer displacement.
  vec disp_vec(const index3& j) const {
    vec x{};
    for (int k = 0; k < g.dim; ++k) x[k] = j[k] * g.delta();
    return x;
  }
  index3 wrap(index3 j) const {
    if (!periodic) return j;
    for (int k = 0; k < g.dim; ++k) j[k] = ((j[k] - lo()) % g.n + g.n) % g.n + lo();
    return j;
  }

  cplx& at(std::size_t q, std::size_t d) { return data[(q_independent ? 0 : q) * disp_size() + d]; }
  cplx at(std::size_t q, std::size_t d) const { return data[(q_independent ? 0 : q) * disp_size() + d]; }

  // phi(q; x_d) at an arbitrary point q: exact form when present, else multilinear
  // interpolation between nodes with zero extension outside the node range.
  cplx eval(const vec& q, std::size_t d) const {
    if (q_independent) return data[d];
    if (exact) return exact(q, disp_vec(disp_unravel(d)));
    const double h = g.delta();
    int base[3] = {0, 0, 0};
    double t[3] = {0, 0, 0};
    for (int k = 0; k < g.dim; ++k) {
      double s = (q[k] + g.L) / h - 0.5;
      double f = std::floor(s);
      base[k] = static_cast<int>(f);
      t[k] = s - f;
      if (t[k] < 1e-12) t[k] = 0.0;
    }
    cplx acc{};
    const int corners = 1 << g.dim;
    for (int c = 0; c < corners; ++c) {
      double w = 1.0;
      index3 i{0, 0, 0};
      bool inside = true;
      for (int k = 0; k < g.dim; ++k) {
        int bit = (c >> k) & 1;
        w *= bit ? t[k] : 1.0 - t[k];
        i[k] = base[k] + bit;
        if (i[k] < 0 || i[k] >= g.n) inside = false;
      }
      if (w == 0.0 || !inside) continue;
      acc += w * data[g.ravel(i) * disp_size() + d];
    }
    return acc;
  }

  static kernel sample(const box_grid& g, int m, bool periodic, bool q_independent, const kernel_fn& f,
                       bool keep_exact = true) {
    kernel k(g, m, periodic, q_independent);
    for (std::size_t q = 0; q < k.slices(); ++q) {
      vec qv = q_independent ? vec{} : g.node(q);
      for (std::size_t d = 0; d < k.disp_size(); ++d) k.at(q, d) = f(qv, k.disp_vec(k.disp_unravel(d)));
    }
    if (keep_exact && !q_independent) k.exact = f;
    return k;
  }

  // q-independent value a(q) delta_0 / delta^N: the multiplication operator by a.
  static kernel multiplier(const box_grid& g, const scalar_fn& a, int m = 0, bool periodic = false) {
    kernel k(g, m, periodic, false);
    long d0 = k.disp_ravel({0, 0, 0});
    double inv = 1.0 / g.cell_volume();
    for (std::size_t q = 0; q < g.size(); ++q) k.at(q, d0) = a(g.node(q)) * inv;
    return k;
  }
  static kernel delta(const box_grid& g, cplx mu = 1.0, int m = 0, bool periodic = false) {
    kernel k(g, m, periodic, true);
    k.at(0, k.disp_ravel({0, 0, 0})) = mu / g.cell_volume();
    return k;
  }

  kernel expanded() const {
    if (!q_independent) return *this;
    kernel r(g, m, periodic, false);
    for (std::size_t q = 0; q < g.size(); ++q)
      std::copy(data.begin(), data.end(), r.data.begin() + q * disp_size());
    r.tail_mass = tail_mass;
    return r;
  }

  // Same element on another displacement range (zero padded or truncated).
  kernel resized(int m_new, bool periodic_new) const {
    kernel r(g, m_new, periodic_new, q_independent);
    r.exact = exact;
    if (!half.empty()) r.half.assign(half_rows() * r.disp_size(), cplx{});
    double dropped = 0.0;
    for (std::size_t d = 0; d < disp_size(); ++d) {
      long e = r.disp_ravel(disp_unravel(d));
      double mx = 0.0;
      for (std::size_t q = 0; q < slices(); ++q) {
        if (e >= 0)
          r.at(q, e) += at(q, d);
        else
          mx = std::max(mx, std::abs(at(q, d)));
      }
      if (e >= 0 && !half.empty())
        for (std::size_t h = 0; h < half_rows(); ++h) r.half[h * r.disp_size() + e] += half[h * disp_size() + d];
      dropped += mx;
    }
    r.tail_mass = tail_mass + dropped * g.cell_volume();
    return r;
  }

  kernel& operator+=(const kernel& o) { return axpy(1.0, o); }
  kernel& operator-=(const kernel& o) { return axpy(-1.0, o); }
  kernel& operator*=(cplx s) {
    for (auto& v : data) v *= s;
    for (auto& v : half) v *= s;
    if (exact) {
      auto e = exact;
      exact = [e, s](const vec& q, const vec& x) { return s * e(q, x); };
    }
    return *this;
  }
  kernel& axpy(cplx s, const kernel& o) {
    if (!(g == o.g) || m != o.m || periodic != o.periodic) throw precondition_error("kernel layout mismatch");
    if (q_independent && !o.q_independent) *this = expanded();
    exact = nullptr;
    if (!half.empty() && !o.half.empty()) {
      for (std::size_t i = 0; i < half.size(); ++i) half[i] += s * o.half[i];
    } else if (!half.empty() && o.q_independent) {
      const std::size_t ds = disp_size();
      for (std::size_t i = 0; i < half.size(); ++i) half[i] += s * o.data[i % ds];
    } else {
      half.clear();
    }
    for (std::size_t q = 0; q < slices(); ++q)
      for (std::size_t d = 0; d < disp_size(); ++d) at(q, d) += s * o.at(o.q_independent ? 0 : q, d);
    tail_mass += std::abs(s) * o.tail_mass;
    return *this;
  }
};

inline kernel operator+(kernel a, const kernel& b) { return a += b; }
inline kernel operator-(kernel a, const kernel& b) { return a -= b; }
inline kernel operator*(cplx s, kernel a) { return a *= s; }

// ---------------------------------------------------------------- partial Fourier

namespace detail {
struct fft_plan {
  fftw_plan plan = nullptr;
  fftw_complex* buf = nullptr;
  fft_plan(int dim, int n, int sign) {
    int dims[3] = {n, n, n};
    std::size_t s = 1;
    for (int k = 0; k < dim; ++k) s *= n;
    buf = fftw_alloc_complex(s);
#pragma omp critical(magweyl_fftw_planner)
    plan = fftw_plan_dft(dim, dims, buf, buf, sign, FFTW_ESTIMATE);
  }
  ~fft_plan() {
#pragma omp critical(magweyl_fftw_planner)
    fftw_destroy_plan(plan);
    fftw_free(buf);
  }
  fft_plan(const fft_plan&) = delete;
  fft_plan& operator=(const fft_plan&) = delete;
  cplx* data() { return reinterpret_cast<cplx*>(buf); }
  void run() { fftw_execute(plan); }
};

// FFTW stores axis 0 slowest; the grid ravels axis 0 fastest.
inline std::size_t fft_index(const index3& i, int dim, int n) {
  std::size_t idx = 0;
  for (int k = 0; k < dim; ++k) idx = idx * n + static_cast<std::size_t>(((i[k] % n) + n) % n);
  return idx;
}
}  // namespace detail

// Largest half-step table (entries) built for callable symbols.
inline std::size_t half_table_budget = std::size_t(1) << 24;

// [F^{-1} f](q; x_j) = (2L)^{-N} sum_m exp(-i p_m . x_j) f(q, p_m)
inline kernel partial_fourier_inv(const phase_function& f, int m = -1, double flush = 1e-14) {
  const box_grid& g = f.g;
  const bool periodic = m < 0 || 2 * m >= g.n;
  kernel k(g, periodic ? g.n / 2 : m, periodic, f.q_independent);
  detail::fft_plan plan(g.dim, g.n, FFTW_FORWARD);
  const double c = std::pow(1.0 / (2 * g.L), g.dim);
  const std::size_t sz = g.size();
  double dropped = 0.0;
  std::vector<double> dropped_per_d(periodic ? 0 : sz, 0.0);
  for (std::size_t q = 0; q < f.slices(); ++q) {
    cplx* b = plan.data();
    for (std::size_t p = 0; p < sz; ++p) {
      index3 i = g.unravel(p);
      for (int a = 0; a < g.dim; ++a) i[a] -= g.n / 2;
      b[detail::fft_index(i, g.dim, g.n)] = f.at(q, p);
    }
    plan.run();
    double mx = 0.0;
    for (std::size_t p = 0; p < sz; ++p) mx = std::max(mx, std::abs(b[p]));
    const double cut = flush * mx;
    for (std::size_t d = 0; d < k.disp_size(); ++d) {
      cplx v = c * b[detail::fft_index(k.disp_unravel(d), g.dim, g.n)];
      if (std::abs(v) <= cut * c) v = 0.0;
      k.at(q, d) = v;
    }
    if (!periodic) {
      // L1 tail of the period outside |j| <= m
      for (std::size_t p = 0; p < sz; ++p) {
        index3 i = g.unravel(p);
        for (int a = 0; a < g.dim; ++a) i[a] -= g.n / 2;
        if (k.disp_ravel(i) < 0) dropped_per_d[p] = std::max(dropped_per_d[p], c * std::abs(b[detail::fft_index(i, g.dim, g.n)]));
      }
    }
  }
  for (double v : dropped_per_d) dropped += v;
  k.tail_mass = dropped * g.cell_volume();
  if (f.fn && !f.q_independent && k.half_rows() * k.disp_size() <= half_table_budget) {
    momentum_grid mg(g);
    k.half.assign(k.half_rows() * k.disp_size(), cplx{});
    const int ha = k.half_axis();
    for (std::size_t h = 0; h < k.half_rows(); ++h) {
      vec q{};
      std::size_t r = h;
      for (int a = 0; a < g.dim; ++a) {
        q[a] = -g.L + (0.5 * static_cast<double>(r % ha) + 0.5) * g.delta();
        r /= ha;
      }
      cplx* b = plan.data();
      for (std::size_t p = 0; p < sz; ++p) {
        index3 i = g.unravel(p);
        for (int a = 0; a < g.dim; ++a) i[a] -= g.n / 2;
        b[detail::fft_index(i, g.dim, g.n)] = f.fn(q, mg.node(p));
      }
      plan.run();
      for (std::size_t d = 0; d < k.disp_size(); ++d)
        k.half[h * k.disp_size() + d] = c * b[detail::fft_index(k.disp_unravel(d), g.dim, g.n)];
    }
  }
  return k;
}

// f(q, p_m) = delta^N sum_j exp(i p_m . x_j) phi(q; x_j); endpoint displacements +-n/2
// of a non-periodic kernel carry half weight per axis so that the round trip is exact.
inline phase_function partial_fourier(const kernel& k) {
  const box_grid& g = k.g;
  if (!k.periodic && 2 * k.m > g.n) throw precondition_error("kernel range exceeds one period");
  phase_function f{g, k.q_independent, {}, {}};
  const std::size_t sz = g.size();
  f.data.assign(f.slices() * sz, cplx{});
  detail::fft_plan plan(g.dim, g.n, FFTW_BACKWARD);
  const double vol = g.cell_volume();
  for (std::size_t q = 0; q < f.slices(); ++q) {
    cplx* b = plan.data();
    std::fill(b, b + sz, cplx{});
    for (std::size_t d = 0; d < k.disp_size(); ++d) {
      index3 j = k.disp_unravel(d);
      double w = 1.0;
      if (!k.periodic)
        for (int a = 0; a < g.dim; ++a)
          if (2 * std::abs(j[a]) == g.n) w *= 0.5;
      b[detail::fft_index(j, g.dim, g.n)] += w * k.at(q, d);
    }
    plan.run();
    for (std::size_t p = 0; p < sz; ++p) {
      index3 i = g.unravel(p);
      for (int a = 0; a < g.dim; ++a) i[a] -= g.n / 2;
      f.at(q, p) = vol * b[detail::fft_index(i, g.dim, g.n)];
    }
  }
  return f;
}

}  // namespace magweyl
