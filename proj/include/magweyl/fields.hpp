#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "quadrature.hpp"
#include "types.hpp"

namespace magweyl {

enum class smoothness { smooth, continuous };
enum class anisotropy { none, const_plus_decay, vanishing_oscillation, mixed_vo_ap, cartesian2d };

// Index of the stored component B_jk, j < k, in {(0,1),(0,2),(1,2)} order.
inline int pair_index(int j, int k) { return j == 0 ? k - 1 : 2; }

// Magnetic 2-form; only the components j < k are stored.
class magnetic_field {
 public:
  magnetic_field() = default;

  magnetic_field(int dim, std::vector<scalar_fn> upper, smoothness s = smoothness::smooth,
                 anisotropy tag = anisotropy::none)
      : dim_(dim), comps_(std::move(upper)), smooth_(s), tag_(tag) {
    if (dim < 1 || dim > 3) throw precondition_error("field dimension must be 1, 2 or 3");
    if (static_cast<int>(comps_.size()) != dim * (dim - 1) / 2)
      throw precondition_error("field needs N(N-1)/2 components");
    if (dim == 3) check_closed(1e-6, 1e-4);
  }

  static magnetic_field uniform(int dim, std::vector<double> b) {
    std::vector<scalar_fn> c;
    for (double v : b) c.push_back([v](const vec&) { return v; });
    magnetic_field f(dim, std::move(c));
    f.constant_ = std::move(b);
    return f;
  }
  static magnetic_field zero(int dim) { return uniform(dim, std::vector<double>(dim * (dim - 1) / 2, 0.0)); }
  static magnetic_field planar(scalar_fn b12, anisotropy tag = anisotropy::none) {
    return magnetic_field(2, {std::move(b12)}, smoothness::smooth, tag);
  }

  int dim() const { return dim_; }
  smoothness smooth_class() const { return smooth_; }
  anisotropy tag() const { return tag_; }
  void set_tag(anisotropy t) { tag_ = t; }
  bool is_constant() const { return constant_.has_value(); }
  const std::vector<double>& constant_values() const { return *constant_; }
  bool is_zero() const {
    return constant_ && std::all_of(constant_->begin(), constant_->end(), [](double v) { return v == 0.0; });
  }

  double operator()(const vec& x, int j, int k) const {
    if (j == k) return 0.0;
    if (j > k) return -(*this)(x, k, j);
    if (constant_) return (*constant_)[pair_index(j, k)];
    return comps_[pair_index(j, k)](x);
  }

  magnetic_field negated() const {
    std::vector<scalar_fn> c;
    for (auto& f : comps_) c.push_back([f](const vec& x) { return -f(x); });
    magnetic_field g(dim_, std::move(c), smooth_, tag_);
    if (constant_) {
      g.constant_ = *constant_;
      for (auto& v : *g.constant_) v = -v;
    }
    return g;
  }

  // max |d1 B23 - d2 B13 + d3 B12| over deterministic sample points
  double closedness_defect(double h, int samples = 64) const {
    if (dim_ < 3) return 0.0;
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      vec x{u(gen), u(gen), u(gen)};
      auto d = [&](int axis, int j, int k) {
        vec a = x, b = x;
        a[axis] += h;
        b[axis] -= h;
        return ((*this)(a, j, k) - (*this)(b, j, k)) / (2 * h);
      };
      worst = std::max(worst, std::abs(d(0, 1, 2) - d(1, 0, 2) + d(2, 0, 1)));
    }
    return worst;
  }

 private:
  void check_closed(double tol, double h) const {
    if (closedness_defect(h) > tol) throw precondition_error("magnetic field is not closed (dB != 0)");
  }

  int dim_ = 2;
  std::vector<scalar_fn> comps_;
  smoothness smooth_ = smoothness::smooth;
  anisotropy tag_ = anisotropy::none;
  std::optional<std::vector<double>> constant_;
};

// Closed-form line integral of A along [q, q+x], when known.
using circulation_fn = std::function<double(const vec& q, const vec& x)>;

struct vector_potential {
  int dim = 2;
  std::vector<scalar_fn> comps;
  circulation_fn analytic;

  vec operator()(const vec& x) const {
    vec a{};
    for (int j = 0; j < dim; ++j) a[j] = comps[j](x);
    return a;
  }

  static vector_potential zero(int dim) {
    vector_potential a;
    a.dim = dim;
    for (int j = 0; j < dim; ++j) a.comps.push_back([](const vec&) { return 0.0; });
    a.analytic = [](const vec&, const vec&) { return 0.0; };
    return a;
  }

  // max |d_j A_k - d_k A_j - B_jk| over sample points
  double curl_mismatch(const magnetic_field& b, double h = 1e-4, int samples = 32, double radius = 4.0) const {
    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> u(-radius, radius);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      vec x{};
      for (int j = 0; j < dim; ++j) x[j] = u(gen);
      for (int j = 0; j < dim; ++j)
        for (int k = j + 1; k < dim; ++k) {
          auto d = [&](int axis, int comp) {
            vec a = x, c = x;
            a[axis] += h;
            c[axis] -= h;
            return (comps[comp](a) - comps[comp](c)) / (2 * h);
          };
          worst = std::max(worst, std::abs(d(j, k) - d(k, j) - b(x, j, k)));
        }
    }
    return worst;
  }
};

struct gauge_function {
  scalar_fn rho;
  std::function<vec(const vec&)> grad;

  double gradient_mismatch(int dim, double h = 1e-5, int samples = 32) const {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      vec x{};
      for (int j = 0; j < dim; ++j) x[j] = u(gen);
      vec g = grad(x);
      for (int j = 0; j < dim; ++j) {
        vec a = x, c = x;
        a[j] += h;
        c[j] -= h;
        worst = std::max(worst, std::abs((rho(a) - rho(c)) / (2 * h) - g[j]));
      }
    }
    return worst;
  }
};

inline double circulation(const vector_potential& a, const vec& q, const vec& x, int order = 8) {
  if (a.analytic) return finite_or_throw(a.analytic(q, x), "circulation");
  const auto& r = gauss_legendre(order);
  double s = 0.0;
  for (int i = 0; i < r.order(); ++i) {
    vec y = q + r.nodes[i] * x;
    double ax = 0.0;
    for (int j = 0; j < a.dim; ++j) ax += a.comps[j](y) * x[j];
    s += r.weights[i] * ax;
  }
  return finite_or_throw(s, "circulation");
}

inline cplx lambda_a(const vector_potential& a, const vec& q, const vec& x, int order = 8) {
  return std::polar(1.0, -circulation(a, q, x, order));
}

// Sum_{j,k} x_j y_k * Int_0^1 dt Int_0^1 ds s B_jk(base + s u + s t w)
inline double parametrized_flux(const magnetic_field& b, const vec& base, const vec& u, const vec& w,
                                const vec& x, const vec& y, int order) {
  const int n = b.dim();
  if (n < 2) return 0.0;
  double c01 = x[0] * y[1] - x[1] * y[0];
  double c02 = n > 2 ? x[0] * y[2] - x[2] * y[0] : 0.0;
  double c12 = n > 2 ? x[1] * y[2] - x[2] * y[1] : 0.0;
  if (c01 == 0.0 && c02 == 0.0 && c12 == 0.0) return 0.0;
  if (b.is_constant()) {
    const auto& v = b.constant_values();
    double s = c01 * v[0];
    if (n > 2) s += c02 * v[1] + c12 * v[2];
    return 0.5 * s;
  }
  const auto& r = gauss_legendre(order);
  double acc = 0.0;
  for (int i = 0; i < r.order(); ++i) {
    double s = r.nodes[i];
    for (int j = 0; j < r.order(); ++j) {
      double t = r.nodes[j];
      vec p = base + s * u + (s * t) * w;
      double f = c01 * b(p, 0, 1);
      if (n > 2) f += c02 * b(p, 0, 2) + c12 * b(p, 1, 2);
      acc += r.weights[i] * r.weights[j] * s * f;
    }
  }
  return finite_or_throw(acc, "flux");
}

// Flux of B through the triangle <q, q+x, q+x+y>.
inline double flux_triangle(const magnetic_field& b, const vec& q, const vec& x, const vec& y, int order = 8) {
  return parametrized_flux(b, q, x, y, x, y, order);
}

inline cplx omega_b(const magnetic_field& b, const vec& q, const vec& x, const vec& y, int order = 8) {
  return std::polar(1.0, -flux_triangle(b, q, x, y, order));
}

inline cplx gamma_b(const magnetic_field& b, const vec& q, const vec& x, const vec& y, int order = 8) {
  vec base = q - 0.5 * x - 0.5 * y;
  return std::polar(1.0, -parametrized_flux(b, base, x, y - x, x, y, order));
}

// A_j(x) = -Sum_k x_k Int_0^1 s B_jk(s x) ds
inline vector_potential transversal_gauge(const magnetic_field& b, int order = 8) {
  vector_potential a;
  a.dim = b.dim();
  if (b.is_constant()) {
    const int n = b.dim();
    auto lin = [b, n](const vec& x) {
      vec r{};
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r[j] -= 0.5 * x[k] * b(x, j, k);
      return r;
    };
    for (int j = 0; j < n; ++j) a.comps.push_back([lin, j](const vec& x) { return lin(x)[j]; });
    a.analytic = [lin](const vec& q, const vec& x) { return dot(lin(q + 0.5 * x), x); };
    return a;
  }
  if (b.dim() == 3 && b.closedness_defect(1e-4) > 1e-6)
    throw precondition_error("transversal gauge needs a closed field");
  for (int j = 0; j < b.dim(); ++j) {
    a.comps.push_back([b, j, order](const vec& x) {
      const auto& r = gauss_legendre(order);
      double acc = 0.0;
      for (int i = 0; i < r.order(); ++i) {
        double s = r.nodes[i];
        vec y = s * x;
        double f = 0.0;
        for (int k = 0; k < b.dim(); ++k) f += x[k] * b(y, j, k);
        acc += r.weights[i] * s * f;
      }
      return -acc;
    });
  }
  return a;
}

inline vector_potential gauge_shift(const vector_potential& a, const gauge_function& g, int order = 8) {
  vector_potential r;
  r.dim = a.dim;
  for (int j = 0; j < a.dim; ++j) {
    auto aj = a.comps[j];
    auto gr = g.grad;
    r.comps.push_back([aj, gr, j](const vec& x) { return aj(x) + gr(x)[j]; });
  }
  auto rho = g.rho;
  r.analytic = [a, rho, order](const vec& q, const vec& x) {
    return circulation(a, q, x, order) + rho(q + x) - rho(q);
  };
  return r;
}

// ---------------------------------------------------------------- anisotropy

struct edge_profile {
  std::function<double(double)> f;
  double minus = 0.0, plus = 0.0;

  static edge_profile constant(double c) { return {[c](double) { return c; }, c, c}; }
  // smooth step from minus to plus of width w centered at 0
  static edge_profile step(double minus, double plus, double w = 1.0) {
    return {[=](double t) { return 0.5 * (minus + plus) + 0.5 * (plus - minus) * std::tanh(t / w); }, minus, plus};
  }
};

enum class family { const_plus_decay, vanishing_oscillation, mixed_vo_ap, cartesian2d };

struct asymptotic_pair {
  magnetic_field field;
  scalar_fn potential;
  std::string label;
  bool constant = false;  // constant field and potential
  double b = 0.0, v = 0.0;
  int variable_axis = -1;  // for one-variable fields: the axis the data depends on
  std::function<double(double)> beta, nu;
};

struct anisotropy_descriptor {
  family fam = family::const_plus_decay;
  int dim = 2;

  // const_plus_decay
  double b_inf = 0.0, v_inf = 0.0;
  scalar_fn b_decay, v_decay;
  double decay_radius = 0.0;

  // vanishing_oscillation (b_vo, v_vo); mixed (c_vo * d_ap, e_vo * w_ap)
  scalar_fn b_vo, v_vo;
  scalar_fn c_vo, e_vo, d_ap, w_ap;
  int samples = 9;
  double probe_inner = 50.0, probe_outer = 200.0;

  // cartesian2d
  edge_profile B1, B2, V1, V2;

  scalar_fn field_fn() const {
    switch (fam) {
      case family::const_plus_decay: {
        double c = b_inf;
        auto d = b_decay;
        return [c, d](const vec& x) { return c + (d ? d(x) : 0.0); };
      }
      case family::vanishing_oscillation: return b_vo;
      case family::mixed_vo_ap: {
        auto c = c_vo, d = d_ap;
        return [c, d](const vec& x) { return c(x) * d(x); };
      }
      case family::cartesian2d: {
        auto b1 = B1.f, b2 = B2.f;
        auto d = b_decay;
        return [b1, b2, d](const vec& x) { return b1(x[0]) * b2(x[1]) + (d ? d(x) : 0.0); };
      }
    }
    throw precondition_error("unknown anisotropy family");
  }

  scalar_fn potential_fn() const {
    switch (fam) {
      case family::const_plus_decay: {
        double c = v_inf;
        auto d = v_decay;
        return [c, d](const vec& x) { return c + (d ? d(x) : 0.0); };
      }
      case family::vanishing_oscillation: return v_vo ? v_vo : scalar_fn([](const vec&) { return 0.0; });
      case family::mixed_vo_ap: {
        if (!e_vo) return [](const vec&) { return 0.0; };
        auto e = e_vo, w = w_ap;
        return [e, w](const vec& x) { return e(x) * (w ? w(x) : 1.0); };
      }
      case family::cartesian2d: {
        auto v1 = V1.f, v2 = V2.f;
        auto d = v_decay;
        return [v1, v2, d](const vec& x) {
          return (v1 ? v1(x[0]) : 0.0) * (v2 ? v2(x[1]) : 0.0) + (d ? d(x) : 0.0);
        };
      }
    }
    throw precondition_error("unknown anisotropy family");
  }

  magnetic_field field() const {
    if (fam == family::const_plus_decay && !b_decay) {
      auto f = magnetic_field::uniform(2, {b_inf});
      f.set_tag(anisotropy::const_plus_decay);
      return f;
    }
    static const anisotropy tags[] = {anisotropy::const_plus_decay, anisotropy::vanishing_oscillation,
                                      anisotropy::mixed_vo_ap, anisotropy::cartesian2d};
    return magnetic_field::planar(field_fn(), tags[static_cast<int>(fam)]);
  }

  // Numerical checks of the family's defining limits.
  void validate(double tol = 1e-6) const {
    if (dim != 2) throw precondition_error("anisotropy descriptors are implemented for N=2");
    if (fam == family::const_plus_decay) {
      for (int k = 0; k < 64; ++k) {
        double th = 2 * pi * k / 64.0;
        for (double r : {decay_radius, 2 * decay_radius + 1.0, 4 * decay_radius + 2.0}) {
          vec x{r * std::cos(th), r * std::sin(th), 0.0};
          if ((b_decay && std::abs(b_decay(x)) > tol) || (v_decay && std::abs(v_decay(x)) > tol))
            throw precondition_error("decaying part exceeds tolerance outside the declared radius");
        }
      }
    }
    if (fam == family::cartesian2d) {
      auto chk = [&](const edge_profile& p, const char* name) {
        if (!p.f) return;
        double far = 1e3;
        if (std::abs(p.f(far) - p.plus) > tol || std::abs(p.f(-far) - p.minus) > tol)
          throw precondition_error(std::string("edge profile ") + name + " does not reach its limits");
      };
      chk(B1, "B1");
      chk(B2, "B2");
      chk(V1, "V1");
      chk(V2, "V2");
    }
  }
};

// Estimated [liminf, limsup] of f over the probe annulus.
inline std::pair<double, double> asymptotic_range(const scalar_fn& f, double r0, double r1, int radial = 400,
                                                  int angular = 64) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < radial; ++i) {
    double r = r0 + (r1 - r0) * (i + 0.5) / radial;
    for (int k = 0; k < angular; ++k) {
      double th = 2 * pi * k / angular;
      double v = f({r * std::cos(th), r * std::sin(th), 0.0});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

inline std::vector<double> sample_range(std::pair<double, double> r, int k) {
  if (r.second - r.first < 1e-12 || k <= 1) return {0.5 * (r.first + r.second)};
  std::vector<double> v;
  for (int i = 0; i < k; ++i) v.push_back(r.first + (r.second - r.first) * i / (k - 1));
  return v;
}

inline asymptotic_pair constant_pair(double b, double v, std::string label) {
  asymptotic_pair p;
  p.field = magnetic_field::uniform(2, {b});
  p.potential = [v](const vec&) { return v; };
  p.label = std::move(label);
  p.constant = true;
  p.b = b;
  p.v = v;
  return p;
}

inline std::vector<asymptotic_pair> asymptotic_pairs(const anisotropy_descriptor& d) {
  d.validate();
  std::vector<asymptotic_pair> out;
  switch (d.fam) {
    case family::const_plus_decay:
      out.push_back(constant_pair(d.b_inf, d.v_inf, "infinity"));
      break;
    case family::vanishing_oscillation: {
      auto bs = sample_range(asymptotic_range(d.b_vo, d.probe_inner, d.probe_outer), d.samples);
      auto vs = d.v_vo ? sample_range(asymptotic_range(d.v_vo, d.probe_inner, d.probe_outer), d.samples)
                       : std::vector<double>{0.0};
      for (double b : bs)
        for (double v : vs) out.push_back(constant_pair(b, v, "vo"));
      break;
    }
    case family::mixed_vo_ap: {
      auto cs = sample_range(asymptotic_range(d.c_vo, d.probe_inner, d.probe_outer), d.samples);
      auto es = d.e_vo ? sample_range(asymptotic_range(d.e_vo, d.probe_inner, d.probe_outer), d.samples)
                       : std::vector<double>{0.0};
      for (double c : cs)
        for (double e : es) {
          asymptotic_pair p;
          auto dap = d.d_ap, wap = d.w_ap;
          p.field = magnetic_field::planar([c, dap](const vec& x) { return c * dap(x); }, anisotropy::mixed_vo_ap);
          p.potential = [e, wap](const vec& x) { return e * (wap ? wap(x) : 1.0); };
          p.label = "vo-ap";
          p.b = c;
          p.v = e;
          out.push_back(std::move(p));
        }
      break;
    }
    case family::cartesian2d: {
      // (b2^- B1, v2^- V1), (b2^+ B1, v2^+ V1), (b1^- B2, v1^- V2), (b1^+ B2, v1^+ V2)
      struct term {
        const edge_profile *carrier, *vcarrier;
        double bscale, vscale;
        int axis;
        const char* label;
      };
      const term terms[] = {{&d.B1, &d.V1, d.B2.minus, d.V2.minus, 0, "x2-"},
                            {&d.B1, &d.V1, d.B2.plus, d.V2.plus, 0, "x2+"},
                            {&d.B2, &d.V2, d.B1.minus, d.V1.minus, 1, "x1-"},
                            {&d.B2, &d.V2, d.B1.plus, d.V1.plus, 1, "x1+"}};
      for (const auto& t : terms) {
        asymptotic_pair p;
        auto bf = t.carrier->f;
        auto vf = t.vcarrier->f;
        double bs = t.bscale, vs = t.vscale;
        int ax = t.axis;
        p.beta = [bf, bs](double s) { return bs * bf(s); };
        p.nu = [vf, vs](double s) { return vf ? vs * vf(s) : 0.0; };
        auto beta = p.beta, nu = p.nu;
        p.field = magnetic_field::planar([beta, ax](const vec& x) { return beta(x[ax]); }, anisotropy::cartesian2d);
        p.potential = [nu, ax](const vec& x) { return nu(x[ax]); };
        p.variable_axis = ax;
        p.label = t.label;
        out.push_back(std::move(p));
      }
      break;
    }
  }
  return out;
}

}  // namespace magweyl
