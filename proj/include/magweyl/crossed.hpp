#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>

#include "fields.hpp"
#include "grid.hpp"

namespace magweyl {

enum class interpolation { linear, cubic };

namespace detail {

// Stencil for the point with half-cell index h: coordinate -L + (h/2 + 1/2) delta.
struct stencil {
  int idx[4];
  double w[4];
  int count = 0;
};

inline stencil half_stencil(int h, int n, bool periodic, interpolation scheme) {
  stencil s;
  auto push = [&](int i, double w) {
    if (periodic)
      i = ((i % n) + n) % n;
    else if (i < 0 || i >= n)
      return;
    s.idx[s.count] = i;
    s.w[s.count] = w;
    ++s.count;
  };
  if ((h & 1) == 0) {
    push(h / 2, 1.0);
  } else {
    const int lo = (h - 1) / 2;
    if (scheme == interpolation::linear) {
      push(lo, 0.5);
      push(lo + 1, 0.5);
    } else {
      push(lo - 1, -1.0 / 16);
      push(lo, 9.0 / 16);
      push(lo + 1, 9.0 / 16);
      push(lo + 2, -1.0 / 16);
    }
  }
  return s;
}

inline vec half_point(const box_grid& g, const index3& h) {
  vec q{};
  for (int k = 0; k < g.dim; ++k) q[k] = -g.L + (0.5 * h[k] + 0.5) * g.delta();
  return q;
}

// phi at the half-lattice point h for displacement slot d.
inline cplx half_eval(const kernel& k, const index3& h, std::size_t d, interpolation scheme) {
  if (k.q_independent) return k.data[d];
  if (k.exact) return k.exact(half_point(k.g, h), k.disp_vec(k.disp_unravel(d)));
  const box_grid& g = k.g;
  const bool per = g.bc == boundary::periodic;
  if (!k.half.empty()) {
    const int ha = k.half_axis();
    std::size_t r = 0;
    for (int a = g.dim - 1; a >= 0; --a) {
      int v = h[a];
      if (per)
        v = ((v % ha) + ha) % ha;
      else if (v < 0 || v >= ha)
        return 0.0;
      r = r * ha + v;
    }
    return k.half[r * k.disp_size() + d];
  }
  stencil s[3];
  for (int a = 0; a < g.dim; ++a) {
    s[a] = half_stencil(h[a], g.n, per, scheme);
    if (s[a].count == 0) return 0.0;
  }
  const std::size_t ds = k.disp_size();
  cplx acc{};
  if (g.dim == 1) {
    for (int i = 0; i < s[0].count; ++i) acc += s[0].w[i] * k.data[s[0].idx[i] * ds + d];
  } else if (g.dim == 2) {
    for (int j = 0; j < s[1].count; ++j)
      for (int i = 0; i < s[0].count; ++i)
        acc += s[0].w[i] * s[1].w[j] * k.data[(static_cast<std::size_t>(s[1].idx[j]) * g.n + s[0].idx[i]) * ds + d];
  } else {
    for (int l = 0; l < s[2].count; ++l)
      for (int j = 0; j < s[1].count; ++j)
        for (int i = 0; i < s[0].count; ++i)
          acc += s[0].w[i] * s[1].w[j] * s[2].w[l] *
                 k.data[((static_cast<std::size_t>(s[2].idx[l]) * g.n + s[1].idx[j]) * g.n + s[0].idx[i]) * ds + d];
  }
  return acc;
}

// Per-axis bounding box of q-rows where the kernel is nonzero.
inline std::array<std::pair<int, int>, 3> support_box(const kernel& k) {
  std::array<std::pair<int, int>, 3> box{};
  for (int a = 0; a < 3; ++a) box[a] = {0, a < k.g.dim ? k.g.n - 1 : 0};
  if (k.q_independent || k.exact || !k.half.empty() || k.g.bc == boundary::periodic) return box;
  for (int a = 0; a < k.g.dim; ++a) box[a] = {k.g.n, -1};
  const std::size_t ds = k.disp_size();
  for (std::size_t q = 0; q < k.g.size(); ++q) {
    bool nz = false;
    for (std::size_t d = 0; d < ds && !nz; ++d) nz = k.data[q * ds + d] != cplx{};
    if (!nz) continue;
    index3 i = k.g.unravel(q);
    for (int a = 0; a < k.g.dim; ++a) {
      box[a].first = std::min(box[a].first, i[a]);
      box[a].second = std::max(box[a].second, i[a]);
    }
  }
  return box;
}

inline std::vector<std::size_t> nonzero_slots(const kernel& k) {
  std::vector<std::size_t> out;
  const std::size_t ds = k.disp_size();
  for (std::size_t d = 0; d < ds; ++d) {
    bool nz = static_cast<bool>(k.exact);
    for (std::size_t q = 0; q < k.slices() && !nz; ++q) nz = k.data[q * ds + d] != cplx{};
    if (nz) out.push_back(d);
  }
  return out;
}

// Half-lattice values rearranged so that row r holds k(h; d) at h = r - off + sgn * j_d.
// Reading one row then walks the slots contiguously.
struct sheared_table {
  std::vector<cplx> t;
  int off = 0, axis = 1, dim = 1;
  bool wrap = false, constant = false;
  std::size_t ds = 0;

  const cplx* row(const index3& h) const {
    if (constant) return t.data();
    std::size_t r = 0;
    for (int a = dim - 1; a >= 0; --a) {
      int v = h[a] + off;
      if (wrap)
        v = ((v % axis) + axis) % axis;
      else if (v < 0 || v >= axis)
        return nullptr;
      r = r * axis + v;
    }
    return t.data() + r * ds;
  }
};

inline std::size_t sheared_rows(const kernel& k) {
  if (k.q_independent) return 1;
  const int ext = k.periodic ? k.g.n / 2 : k.m;
  const std::size_t axis = k.g.bc == boundary::periodic ? 2 * k.g.n : 2 * k.g.n - 1 + 2 * ext;
  std::size_t r = 1;
  for (int a = 0; a < k.g.dim; ++a) r *= axis;
  return r;
}

inline sheared_table shear(const kernel& k, int sgn, interpolation scheme) {
  sheared_table s;
  s.dim = k.g.dim;
  s.ds = k.disp_size();
  if (k.q_independent) {
    s.constant = true;
    s.t.assign(k.data.begin(), k.data.begin() + s.ds);
    return s;
  }
  const int ext = k.periodic ? k.g.n / 2 : k.m;
  s.wrap = k.g.bc == boundary::periodic;
  s.off = s.wrap ? 0 : ext;
  s.axis = s.wrap ? 2 * k.g.n : 2 * k.g.n - 1 + 2 * ext;
  const std::size_t rows = sheared_rows(k);
  s.t.assign(rows * s.ds, cplx{});
  std::vector<index3> js(s.ds);
  for (std::size_t d = 0; d < s.ds; ++d) js[d] = k.disp_unravel(d);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < static_cast<long>(rows); ++r) {
    index3 base{0, 0, 0};
    std::size_t rr = r;
    for (int a = 0; a < s.dim; ++a) {
      base[a] = static_cast<int>(rr % s.axis) - s.off;
      rr /= s.axis;
    }
    for (std::size_t d = 0; d < s.ds; ++d) {
      index3 h{base[0] + sgn * js[d][0], base[1] + sgn * js[d][1], base[2] + sgn * js[d][2]};
      s.t[r * s.ds + d] = half_eval(k, h, d, scheme);
    }
  }
  return s;
}

inline std::size_t sheared_budget = std::size_t(1) << 25;

}  // namespace detail

struct product_options {
  int m_out = -1;  // displacement half-range of the result; -1 picks min(m_phi + m_psi, n/2)
  interpolation scheme = interpolation::linear;
  bool cocycle_cache = false;  // memoize omega for q-independent cocycles (constant fields)
  int quad_order = 8;
  double tail_warn = 1e-8;
};

// (phi <> psi)(q; x) = Sum_y delta^N phi(q + (y-x)/2; y) psi(q + y/2; x-y) omega(q - x/2; y, x-y)
inline kernel twisted_product(const kernel& phi, const kernel& psi, const magnetic_field& b,
                              const product_options& opt = {}) {
  const box_grid& g = phi.g;
  if (!(g == psi.g)) throw precondition_error("kernel grids differ");
  if (b.dim() != g.dim) throw precondition_error("field dimension differs from grid");
  const bool periodic = phi.periodic && psi.periodic;
  int m_out = opt.m_out;
  if (periodic) {
    m_out = g.n / 2;
  } else if (m_out < 0) {
    m_out = std::min(phi.m + psi.m, g.n / 2);
  }
  const bool q_indep = phi.q_independent && psi.q_independent && b.is_constant();
  kernel out(g, m_out, periodic && 2 * m_out >= g.n, q_indep);

  const double vol = g.cell_volume();
  const bool const_field = b.is_constant();
  const bool zero_field = b.is_zero();
  std::vector<double> bc(3, 0.0);
  if (const_field) {
    const auto& v = b.constant_values();
    std::copy(v.begin(), v.end(), bc.begin());
  }

  const auto phi_slots = detail::nonzero_slots(phi);
  std::vector<index3> phi_j(phi_slots.size());
  for (std::size_t s = 0; s < phi_slots.size(); ++s) phi_j[s] = phi.disp_unravel(phi_slots[s]);

  // Rows of the output that can be nonzero.
  auto box_phi = detail::support_box(phi), box_psi = detail::support_box(psi);
  const int reach_phi = (phi.m + m_out) / 2 + 2, reach_psi = phi.m / 2 + 2;
  auto row_active = [&](const index3& i) {
    if (q_indep) return true;
    for (int a = 0; a < g.dim; ++a) {
      if (i[a] < box_phi[a].first - reach_phi || i[a] > box_phi[a].second + reach_phi) return false;
      if (i[a] < box_psi[a].first - reach_psi || i[a] > box_psi[a].second + reach_psi) return false;
    }
    return true;
  };

  auto finish = [&](kernel& out) {
    const std::size_t ds_out = out.disp_size();
    double tail = 0.0;
    // Mass on the outermost kept ring estimates what a narrower range drops.
    if (!out.periodic && phi.m + psi.m > m_out) {
      for (std::size_t d = 0; d < ds_out; ++d) {
        index3 j = out.disp_unravel(d);
        bool edge = false;
        for (int a = 0; a < g.dim; ++a) edge = edge || std::abs(j[a]) == m_out;
        if (!edge) continue;
        double mx = 0.0;
        for (std::size_t q = 0; q < out.slices(); ++q) mx = std::max(mx, std::abs(out.at(q, d)));
        tail += mx;
      }
      tail *= vol;
    }
    out.tail_mass = tail + phi.tail_mass + psi.tail_mass;
    if (out.tail_mass > opt.tail_warn)
      out.warnings.push_back("displacement truncation tail mass " + std::to_string(out.tail_mass));
  };

  // q-independent operands on a constant field: one slice, direct double loop.
  if (q_indep) {
    const std::size_t ds_out = out.disp_size();
#pragma omp parallel for schedule(static)
    for (long dx = 0; dx < static_cast<long>(ds_out); ++dx) {
      const index3 jx = out.disp_unravel(dx);
      cplx acc{};
      for (std::size_t s = 0; s < phi_slots.size(); ++s) {
        const index3& jy = phi_j[s];
        index3 jz{jx[0] - jy[0], jx[1] - jy[1], jx[2] - jy[2]};
        long dz = psi.disp_ravel(jz);
        if (dz < 0) continue;
        cplx p = psi.data[dz];
        if (p == cplx{}) continue;
        cplx w = 1.0;
        if (!zero_field) {
          vec y = phi.disp_vec(jy), z = psi.disp_vec(psi.wrap(jz));
          double fl = 0.5 * (bc[0] * (y[0] * z[1] - y[1] * z[0]));
          if (g.dim == 3) fl += 0.5 * (bc[1] * (y[0] * z[2] - y[2] * z[0]) + bc[2] * (y[1] * z[2] - y[2] * z[1]));
          w = std::polar(1.0, -fl);
        }
        acc += phi.data[phi_slots[s]] * p * w;
      }
      out.data[dx] = vol * acc;
    }
    finish(out);
    return out;
  }

  // Constant fields: sheared tables, one contiguous row of each operand per output entry.
  if (const_field && detail::sheared_rows(phi) * phi.disp_size() <= detail::sheared_budget &&
      detail::sheared_rows(psi) * psi.disp_size() <= detail::sheared_budget) {
    const auto tphi = detail::shear(phi, 1, opt.scheme), tpsi = detail::shear(psi, -1, opt.scheme);
    const std::size_t ds_out = out.disp_size();
    const int mphi = phi.periodic ? g.n / 2 : phi.m;
    const int W = 2 * g.n + 1;
    // e^{-i b delta^2 u v / 2} for integer u, v in [-n, n], one table per field component
    const int npairs = g.dim * (g.dim - 1) / 2;
    std::vector<std::vector<cplx>> T(npairs);
    const double d2 = g.delta() * g.delta();
    for (int c = 0; c < npairs; ++c) {
      T[c].resize(static_cast<std::size_t>(W) * W);
      for (int u = -g.n; u <= g.n; ++u)
        for (int v = -g.n; v <= g.n; ++v) T[c][(u + g.n) * W + v + g.n] = std::polar(1.0, -0.5 * bc[c] * d2 * u * v);
    }
    static const int pj[3] = {0, 0, 1}, pk[3] = {1, 2, 2};
    std::size_t stride[3] = {1, 0, 0};
    for (int a = 1; a < g.dim; ++a) stride[a] = stride[a - 1] * psi.per_axis();
    const long rows = static_cast<long>(out.slices());
#pragma omp parallel
    {
      std::vector<int> zi(3 * (2 * mphi + 1)), zc(3 * (2 * mphi + 1));
#pragma omp for schedule(dynamic)
      for (long qi = 0; qi < rows; ++qi) {
        const index3 iq = g.unravel(qi);
        if (!row_active(iq)) continue;
        for (std::size_t dx = 0; dx < ds_out; ++dx) {
          const index3 jx = out.disp_unravel(dx);
          const cplx* rf = tphi.row({2 * iq[0] - jx[0], 2 * iq[1] - jx[1], 2 * iq[2] - jx[2]});
          const cplx* rp = tpsi.row({2 * iq[0] + jx[0], 2 * iq[1] + jx[1], 2 * iq[2] + jx[2]});
          if (!rf || !rp) continue;
          for (int a = 0; a < g.dim; ++a)
            for (int u = -mphi; u <= mphi; ++u) {
              index3 z{0, 0, 0};
              z[a] = jx[a] - u;
              long e = psi.disp_ravel(z);
              const std::size_t slot = a * (2 * mphi + 1) + u + mphi;
              if (e < 0) {
                zi[slot] = -1;
                continue;
              }
              zi[slot] = static_cast<int>(psi.disp_unravel(e)[a] + (psi.periodic ? g.n / 2 : psi.m));
              zc[slot] = psi.wrap(z)[a];
            }
          cplx acc{};
          for (std::size_t s = 0; s < phi_slots.size(); ++s) {
            const index3& jy = phi_j[s];
            std::size_t dz = 0;
            bool ok = true;
            for (int a = 0; a < g.dim && ok; ++a) {
              int v = zi[a * (2 * mphi + 1) + jy[a] + mphi];
              ok = v >= 0;
              dz += static_cast<std::size_t>(v) * stride[a];
            }
            if (!ok) continue;
            const cplx f = rf[phi_slots[s]];
            if (f == cplx{}) continue;
            cplx v = f * rp[dz];
            if (!zero_field)
              for (int c = 0; c < npairs; ++c) {
                const int zj = zc[pj[c] * (2 * mphi + 1) + jy[pj[c]] + mphi];
                const int zk = zc[pk[c] * (2 * mphi + 1) + jy[pk[c]] + mphi];
                v *= T[c][(jy[pj[c]] + g.n) * W + zk + g.n] * std::conj(T[c][(jy[pk[c]] + g.n) * W + zj + g.n]);
              }
            acc += v;
          }
          out.at(qi, dx) = vol * acc;
        }
      }
    }
    finish(out);
    return out;
  }

  // For every output displacement x, the admissible (y, x - y) pairs; independent of q.
  struct term {
    std::uint32_t slot, dz;
    index3 jy;
    vec y, z;
    cplx w;
  };
  const std::size_t ds_out = out.disp_size();
  const bool cache = opt.cocycle_cache && const_field && !zero_field;
  std::vector<std::vector<term>> terms(ds_out);
#pragma omp parallel for schedule(dynamic)
  for (long dx = 0; dx < static_cast<long>(ds_out); ++dx) {
    const index3 jx = out.disp_unravel(dx);
    for (std::size_t s = 0; s < phi_slots.size(); ++s) {
      const index3& jy = phi_j[s];
      index3 jz{jx[0] - jy[0], jx[1] - jy[1], jx[2] - jy[2]};
      long dz = psi.disp_ravel(jz);
      if (dz < 0) continue;
      term t{static_cast<std::uint32_t>(phi_slots[s]), static_cast<std::uint32_t>(dz), jy, phi.disp_vec(jy),
             psi.disp_vec(psi.wrap(jz)), 1.0};
      if (cache) t.w = omega_b(b, vec{}, t.y, t.z, opt.quad_order);
      terms[dx].push_back(t);
    }
  }

  const long rows = static_cast<long>(out.slices());
#pragma omp parallel for schedule(dynamic)
  for (long qi = 0; qi < rows; ++qi) {
    index3 iq = q_indep ? index3{0, 0, 0} : g.unravel(qi);
    if (!row_active(iq)) continue;
    const vec qv = q_indep ? vec{} : g.node(qi);
    for (std::size_t dx = 0; dx < ds_out; ++dx) {
      const index3 jx = out.disp_unravel(dx);
      const vec xv = out.disp_vec(jx);
      cplx acc{};
      for (const term& t : terms[dx]) {
        const index3& jy = t.jy;
        index3 h1{2 * iq[0] + jy[0] - jx[0], 2 * iq[1] + jy[1] - jx[1], 2 * iq[2] + jy[2] - jx[2]};
        cplx f = detail::half_eval(phi, h1, t.slot, opt.scheme);
        if (f == cplx{}) continue;
        index3 h2{2 * iq[0] + jy[0], 2 * iq[1] + jy[1], 2 * iq[2] + jy[2]};
        cplx p = detail::half_eval(psi, h2, t.dz, opt.scheme);
        if (p == cplx{}) continue;
        cplx w = 1.0;
        if (cache) {
          w = t.w;
        } else if (!zero_field) {
          const vec& y = t.y;
          const vec& z = t.z;
          if (const_field) {
            double fl = 0.5 * (bc[0] * (y[0] * z[1] - y[1] * z[0]));
            if (g.dim == 3) fl += 0.5 * (bc[1] * (y[0] * z[2] - y[2] * z[0]) + bc[2] * (y[1] * z[2] - y[2] * z[1]));
            w = std::polar(1.0, -fl);
          } else {
            w = omega_b(b, qv - 0.5 * xv, y, z, opt.quad_order);
          }
        }
        acc += f * p * w;
      }
      out.at(qi, dx) = vol * acc;
    }
  }

  finish(out);
  return out;
}

// phi^<>(q; x) = conj(phi(q; -x))
inline kernel twisted_involution(const kernel& phi) {
  kernel out(phi.g, phi.m, phi.periodic, phi.q_independent);
  for (std::size_t d = 0; d < phi.disp_size(); ++d) {
    index3 j = phi.disp_unravel(d);
    long e = phi.disp_ravel({-j[0], -j[1], -j[2]});
    for (std::size_t q = 0; q < phi.slices(); ++q) out.at(q, static_cast<std::size_t>(e)) = std::conj(phi.at(q, d));
    if (!phi.half.empty()) {
      if (out.half.empty()) out.half.assign(phi.half.size(), cplx{});
      for (std::size_t h = 0; h < phi.half_rows(); ++h)
        out.half[h * phi.disp_size() + e] = std::conj(phi.half[h * phi.disp_size() + d]);
    }
  }
  if (phi.exact) {
    auto ex = phi.exact;
    out.exact = [ex](const vec& q, const vec& x) { return std::conj(ex(q, -x)); };
  }
  out.tail_mass = phi.tail_mass;
  return out;
}

// Sum_x sup_q |phi(q; x)| delta^N
inline double l1_norm(const kernel& phi) {
  double s = 0.0;
  for (std::size_t d = 0; d < phi.disp_size(); ++d) {
    double mx = 0.0;
    for (std::size_t q = 0; q < phi.slices(); ++q) mx = std::max(mx, std::abs(phi.at(q, d)));
    s += mx;
  }
  return s * phi.g.cell_volume();
}

// ---------------------------------------------------------------- operators on the grid

struct operator_matrix {
  Eigen::MatrixXcd m;
  bool hermitian = false;
  std::optional<box_grid> grid;

  double hermiticity_residual() const {
    double mx = m.cwiseAbs().maxCoeff();
    if (mx == 0.0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() / mx;
  }
  void mark_hermitian(double tol = 1e-12) {
    hermitian = hermiticity_residual() <= tol;
    if (hermitian) m = 0.5 * (m + m.adjoint()).eval();
  }
  std::size_t size() const { return static_cast<std::size_t>(m.rows()); }
};

namespace detail {

// Visits the nonzero entries M[a, b] = delta^N lambda^A(x_a; x_b - x_a) phi((x_a + x_b)/2; x_b - x_a).
template <class Sink>
void rep_entries(const vector_potential& A, const kernel& phi, interpolation scheme, int order, Sink&& sink) {
  const box_grid& g = phi.g;
  if (A.dim != g.dim) throw precondition_error("potential dimension differs from grid");
  const std::size_t sz = g.size();
  const bool per_box = g.bc == boundary::periodic;
  const double vol = g.cell_volume();
  const auto slots = nonzero_slots(phi);
  const bool zero_a = A.comps.empty();

  // Each stored displacement j may realize b - a = j + n t on a truncated box when the
  // kernel covers the full period (the endpoint j = -n/2 stands for both signs).
  struct realization {
    std::size_t slot;
    index3 step;
  };
  std::vector<realization> steps;
  for (std::size_t s : slots) {
    index3 j = phi.disp_unravel(s);
    if (per_box || !phi.periodic) {
      steps.push_back({s, j});
      continue;
    }
    int combos = 1;
    for (int a = 0; a < g.dim; ++a) combos *= 3;
    for (int c = 0; c < combos; ++c) {
      index3 t = j;
      int cc = c;
      bool ok = true;
      for (int a = 0; a < g.dim; ++a) {
        int shift = cc % 3 - 1;
        cc /= 3;
        t[a] = j[a] + shift * g.n;
        if (2 * std::abs(t[a]) > g.n) ok = false;
      }
      if (ok) steps.push_back({s, t});
    }
  }

  const long rows = static_cast<long>(sz);
#pragma omp parallel for schedule(dynamic)
  for (long a = 0; a < rows; ++a) {
    index3 ia = g.unravel(a);
    vec xa = g.node(a);
    for (const auto& st : steps) {
      index3 ib{ia[0] + st.step[0], ia[1] + st.step[1], ia[2] + st.step[2]};
      bool inside = true;
      for (int k = 0; k < g.dim; ++k) {
        if (per_box)
          ib[k] = ((ib[k] % g.n) + g.n) % g.n;
        else if (ib[k] < 0 || ib[k] >= g.n)
          inside = false;
      }
      if (!inside) continue;
      index3 h{2 * ia[0] + st.step[0], 2 * ia[1] + st.step[1], 2 * ia[2] + st.step[2]};
      cplx v = half_eval(phi, h, st.slot, scheme);
      if (v == cplx{}) continue;
      vec d{};
      for (int k = 0; k < g.dim; ++k) d[k] = st.step[k] * g.delta();
      cplx lam = zero_a ? cplx(1.0) : lambda_a(A, xa, d, order);
      sink(a, static_cast<long>(g.ravel(ib)), vol * lam * v);
    }
  }
}

}  // namespace detail

inline operator_matrix rep(const vector_potential& A, const kernel& phi,
                           interpolation scheme = interpolation::linear, int order = 8) {
  operator_matrix M;
  M.grid = phi.g;
  M.m = Eigen::MatrixXcd::Zero(phi.g.size(), phi.g.size());
  detail::rep_entries(A, phi, scheme, order, [&](long a, long b, cplx v) { M.m(a, b) += v; });
  M.mark_hermitian();
  return M;
}

// Same entries in compressed storage, for compactly supported kernels on large grids.
inline Eigen::SparseMatrix<cplx, Eigen::RowMajor> rep_sparse(const vector_potential& A, const kernel& phi,
                                                             interpolation scheme = interpolation::linear,
                                                             int order = 8) {
  const long n = static_cast<long>(phi.g.size());
  std::vector<std::vector<std::pair<long, cplx>>> rows(n);
  detail::rep_entries(A, phi, scheme, order, [&](long a, long b, cplx v) { rows[a].emplace_back(b, v); });
  std::vector<Eigen::Triplet<cplx>> trips;
  for (long a = 0; a < n; ++a)
    for (auto& [b, v] : rows[a]) trips.emplace_back(a, b, v);
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> S(n, n);
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

inline operator_matrix op_weyl(const vector_potential& A, const phase_function& f, int m = -1,
                               interpolation scheme = interpolation::linear) {
  return rep(A, partial_fourier_inv(f, m), scheme);
}

inline operator_matrix multiplication(const box_grid& g, const scalar_fn& v) {
  operator_matrix M;
  M.grid = g;
  M.m = Eigen::MatrixXcd::Zero(g.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) M.m(i, i) = v(g.node(i));
  M.hermitian = true;
  return M;
}

// U_rho = diag(exp(i rho(x)))
inline Eigen::VectorXcd gauge_phases(const box_grid& g, const scalar_fn& rho) {
  Eigen::VectorXcd u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) u(i) = std::polar(1.0, rho(g.node(i)));
  return u;
}

// mu 1 + phi in the minimal unitization.
struct unitized_kernel {
  cplx mu = 0.0;
  kernel phi;

  double norm() const { return std::abs(mu) + l1_norm(phi); }
  unitized_kernel product(const unitized_kernel& o, const magnetic_field& b, const product_options& opt = {}) const {
    kernel k = twisted_product(phi, o.phi, b, opt);
    k += mu * o.phi.resized(k.m, k.periodic);
    k += o.mu * phi.resized(k.m, k.periodic);
    return {mu * o.mu, k};
  }
  operator_matrix represent(const vector_potential& A, interpolation scheme = interpolation::linear) const {
    operator_matrix M = rep(A, phi, scheme);
    M.m.diagonal().array() += mu;
    M.mark_hermitian();
    return M;
  }
};

// ---------------------------------------------------------------- export

// Binary layout: uint64 rows, uint64 cols, then row-major (re, im) little-endian doubles.
inline void export_binary(const operator_matrix& M, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  std::uint64_t r = M.m.rows(), c = M.m.cols();
  os.write(reinterpret_cast<const char*>(&r), 8);
  os.write(reinterpret_cast<const char*>(&c), 8);
  for (Eigen::Index i = 0; i < M.m.rows(); ++i)
    for (Eigen::Index j = 0; j < M.m.cols(); ++j) {
      double v[2] = {M.m(i, j).real(), M.m(i, j).imag()};
      os.write(reinterpret_cast<const char*>(v), 16);
    }
}

inline operator_matrix import_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::uint64_t r = 0, c = 0;
  is.read(reinterpret_cast<char*>(&r), 8);
  is.read(reinterpret_cast<char*>(&c), 8);
  operator_matrix M;
  M.m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < M.m.rows(); ++i)
    for (Eigen::Index j = 0; j < M.m.cols(); ++j) {
      double v[2];
      is.read(reinterpret_cast<char*>(v), 16);
      M.m(i, j) = {v[0], v[1]};
    }
  if (!is) throw std::runtime_error("truncated matrix file " + path);
  M.mark_hermitian();
  return M;
}

// One row per matrix row; entries as "re,im" pairs separated by commas.
inline void export_csv(const operator_matrix& M, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.m.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.m.cols(); ++j) {
      if (j) os << ',';
      os << M.m(i, j).real() << ',' << M.m(i, j).imag();
    }
    os << '\n';
  }
}

}  // namespace magweyl
