#include <magweyl/moyal.hpp>

#include <catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace magweyl;
using Catch::Matchers::WithinAbs;

namespace {

bool bulk(const box_grid& g, const vec& q) {
  for (int k = 0; k < g.dim; ++k)
    if (g.L - std::abs(q[k]) <= g.L / 4) return false;
  return true;
}

double bulk_diff(const phase_function& a, const std::function<cplx(const vec&, const vec&)>& ref,
                 double p_max = 1e300) {
  const box_grid& g = a.g;
  momentum_grid mg(g);
  double e = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    vec qv = g.node(q);
    if (!a.q_independent && !bulk(g, qv)) continue;
    for (std::size_t p = 0; p < g.size(); ++p) {
      vec pv = mg.node(p);
      bool in = true;
      for (int k = 0; k < g.dim; ++k) in = in && std::abs(pv[k]) <= p_max;
      if (!in) continue;
      e = std::max(e, std::abs(a.at(q, p) - ref(qv, pv)));
    }
    if (a.q_independent) break;
  }
  return e;
}

double bulk_diff(const phase_function& a, const phase_function& b) {
  const box_grid& g = a.g;
  double e = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    if (!bulk(g, g.node(q))) continue;
    for (std::size_t p = 0; p < g.size(); ++p) e = std::max(e, std::abs(a.at(q, p) - b.at(q, p)));
  }
  return e;
}

phase_fn fn(const oracle::gaussian& G) {
  return [G](const vec& q, const vec& p) { return G(q, p); };
}

}  // namespace

TEST_CASE("symbol type and ellipticity checks", "[moyal]") {
  auto j2 = symbol::japanese(2, 2.0);
  auto r = j2.check_type();
  CHECK(r.bounded);
  CHECK(r.c[0] <= 1.0 + 1e-12);
  CHECK(r.c[1] <= 2.0 + 1e-4);
  CHECK(j2.check_elliptic());

  auto lap = symbol::laplacian(2);
  CHECK(lap.check_type().bounded);
  CHECK(lap.check_elliptic());

  symbol cubic;
  cubic.dim = 2;
  cubic.order = 2;
  cubic.h = [](const vec& p) { return std::pow(p[0] * p[0] + p[1] * p[1], 1.5); };
  CHECK_FALSE(cubic.check_type().bounded);

  symbol one_axis = symbol::laplacian(2);
  one_axis.h = [](const vec& p) { return p[0] * p[0]; };
  one_axis.gradient = nullptr;
  one_axis.hessian = nullptr;
  CHECK(one_axis.check_type().bounded);
  CHECK_FALSE(one_axis.check_elliptic());

  auto frac = symbol::japanese(3, 0.5);
  CHECK(frac.check_type().bounded);
  CHECK(frac.check_elliptic());
}

TEST_CASE("cutoff family is a smooth bump", "[moyal]") {
  CHECK(cutoff_family::base(0.0) == 1.0);
  CHECK(cutoff_family::base(1.0) == 1.0);
  CHECK(cutoff_family::base(2.0) == 0.0);
  for (double r = 0; r < 3; r += 0.01) {
    double v = cutoff_family::base(r);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(cutoff_family::base(r + 0.01) <= v);
  }
  // value and slope continuous at both junctions
  const double h = 1e-6;
  CHECK_THAT(cutoff_family::base(1 + h), WithinAbs(1.0, 1e-12));
  CHECK_THAT(cutoff_family::base(2 - h), WithinAbs(0.0, 1e-12));
  cutoff_family chi;
  vec q{0.7, -1.1, 0}, p{2.0, 0.3, 0};
  double prev = 0.0;
  for (double n : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    double v = chi(q, p, 2, n);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("regularize multiplies by the scaled cutoff", "[moyal]") {
  box_grid g(2, 4.0, 16);
  auto one = phase_function::sample(g, [](const vec&, const vec&) { return cplx(1.0); });
  cutoff_family chi;
  auto r = regularize(one, 2.0, chi);
  momentum_grid mg(g);
  for (std::size_t q = 0; q < g.size(); q += 7)
    for (std::size_t p = 0; p < g.size(); p += 5)
      CHECK(r.at(q, p) == cplx(chi(g.node(q), mg.node(p), 2, 2.0)));
  oracle::gaussian G;
  G.a = 0.3;
  auto f = phase_function::sample(g, fn(G));
  auto big = regularize(f, 100.0, chi);
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(big.data[i] == f.data[i]);

  cutoff_family momentum_only{cutoff_family::variable::momentum};
  auto h = phase_function::momentum(g, [](const vec& p) { return cplx(1 + p[0] * p[0] + p[1] * p[1]); });
  auto hr = regularize(h, 1.0, momentum_only);
  CHECK(hr.q_independent);
  REQUIRE(hr.fn);
  CHECK(hr.fn(vec{3, 3, 0}, vec{0.5, 0, 0}) == cplx(1.25));
  CHECK(hr.fn(vec{0, 0, 0}, vec{2.5, 0, 0}) == cplx(0.0));
}

TEST_CASE("involution conjugates pointwise", "[moyal]") {
  box_grid g(2, 4.0, 12);
  oracle::gaussian G;
  G.q0 = {0.5, -0.2, 0};
  auto f = phase_function::sample(g, fn(G));
  auto fi = involution(f);
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(fi.data[i] == f.data[i]);
  G.c = cplx(0, 1);
  auto h = phase_function::sample(g, fn(G));
  auto hi = involution(h);
  for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(hi.data[i] == std::conj(h.data[i]));
  CHECK(hi.fn(vec{0.5, -0.2, 0}, vec{}) == cplx(0, -1));
}

TEST_CASE("constant symbol is the unit", "[moyal]") {
  box_grid g(2, 6.0, 24);
  auto b = magnetic_field::uniform(2, {0.5});
  oracle::gaussian G;
  G.a = 0.6;
  G.q0 = {0.4, -0.3, 0};
  G.p0 = {0.2, 0.5, 0};
  auto f = phase_function::sample(g, fn(G));
  auto one = phase_function::momentum(g, [](const vec&) { return cplx(1.0); });
  CHECK(bulk_diff(moyal(one, f, b), f) < 1e-10);
  CHECK(bulk_diff(moyal(f, one, b), f) < 1e-10);
}

TEST_CASE("momentum symbols commute without a field", "[moyal]") {
  box_grid g(2, 5.0, 20, boundary::periodic);
  auto b = magnetic_field::zero(2);
  auto hf = [](const vec& p) { return cplx(1 + p[0] * p[0] + 0.5 * p[1] * p[1]); };
  auto gf = [](const vec& p) { return cplx(std::exp(-0.3 * (p[0] * p[0] + p[1] * p[1])), 0.1 * p[0]); };
  auto h = phase_function::momentum(g, hf), k = phase_function::momentum(g, gf);
  auto prod = moyal(h, k, b);
  CHECK(prod.q_independent);
  CHECK(bulk_diff(prod, [&](const vec&, const vec& p) { return hf(p) * gf(p); }) < 1e-11);
}

TEST_CASE("canonical commutator without a field", "[moyal]") {
  box_grid g(2, 6.0, 24);
  auto b = magnetic_field::zero(2);
  momentum_grid mg(g);
  auto inner = [](const vec& q) { return std::abs(q[0]) <= 1.5 && std::abs(q[1]) <= 1.5; };
  cutoff_family chiq{cutoff_family::variable::position}, chip{cutoff_family::variable::momentum};
  auto Q = regularize(phase_function::sample(g, [](const vec& q, const vec&) { return cplx(q[0]); }), 5.0, chiq);

  // regularized p1: the commutator is i wherever both cutoffs are flat
  const double pc = 3.0;
  auto P = regularize(phase_function::momentum(g, [](const vec& p) { return cplx(p[0]); }), pc, chip);
  auto qp = moyal(Q, P, b), pq = moyal(P, Q, b);
  double e = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    if (!inner(g.node(q))) continue;
    for (std::size_t p = 0; p < g.size(); ++p) {
      vec pv = mg.node(p);
      if (std::hypot(pv[0], pv[1]) > pc) continue;
      e = std::max(e, std::abs(qp.at(q, p) - pq.at(q, p) - cplx(0, 1)));
    }
  }
  CHECK(e < 5e-2);

  // [q1, w] = i dw/dp1 for a resolved momentum symbol
  auto wf = [](const vec& p) { return cplx(p[0] * std::exp(-0.5 * (p[0] * p[0] + p[1] * p[1]))); };
  auto W = phase_function::momentum(g, wf);
  auto qw = moyal(Q, W, b), wq = moyal(W, Q, b);
  double e2 = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    if (!inner(g.node(q))) continue;
    for (std::size_t p = 0; p < g.size(); ++p) {
      vec pv = mg.node(p);
      cplx ref = cplx(0, 1) * (1 - pv[0] * pv[0]) * std::exp(-0.5 * (pv[0] * pv[0] + pv[1] * pv[1]));
      e2 = std::max(e2, std::abs(qw.at(q, p) - wq.at(q, p) - ref));
    }
  }
  CHECK(e2 < 1e-6);
}

TEST_CASE("Gaussian products match the harmonic-oscillator closed form", "[moyal]") {
  box_grid g(2, 6.0, 24);
  auto b = magnetic_field::zero(2);
  oracle::gaussian F, G;
  F.a = 0.5;
  G.a = 0.8;
  SECTION("centred") {}
  SECTION("squeezed and shifted") {
    F.s = G.s = 1.25;
    F.q0 = G.q0 = {0.3, -0.4, 0};
    F.p0 = G.p0 = {-0.2, 0.6, 0};
    G.c = cplx(0.3, -0.7);
  }
  auto H = oracle::compose(F, G);
  auto prod = moyal(phase_function::sample(g, fn(F)), phase_function::sample(g, fn(G)), b);
  CHECK(bulk_diff(prod, fn(H)) < 5e-5);
}

TEST_CASE("direct quadrature oracle", "[moyal]") {
  auto b0 = magnetic_field::zero(2);
  oracle::gaussian F, G;
  F.a = 0.5;
  G.a = 0.8;
  direct_quadrature dq;
  dq.panels = 4;
  auto H = oracle::compose(F, G);
  CHECK(std::abs(moyal_direct(fn(F), fn(G), b0, vec{}, vec{}, dq) - H(vec{}, vec{})) < 1e-4);

  phase_fn zero = [](const vec&, const vec&) { return cplx{}; };
  CHECK(moyal_direct(zero, fn(G), magnetic_field::uniform(2, {0.5}), vec{0.2, 0.1, 0}, vec{0.3, 0, 0}, dq) ==
        cplx{});

  direct_quadrature huge = dq;
  huge.panels = 40;
  CHECK_THROWS_AS(moyal_direct(fn(F), fn(G), b0, vec{}, vec{}, huge), numerical_error);
}

TEST_CASE("grid route agrees with the direct oracle in a constant field", "[moyal]") {
  auto b = magnetic_field::uniform(2, {0.5});
  oracle::gaussian F, G;
  F.a = 0.5;
  F.q0 = {0.3, -0.2, 0};
  F.p0 = {0.1, 0.2, 0};
  G.a = 0.8;
  G.s = 1.2;
  G.c = cplx(0.5, 0.5);
  direct_quadrature dq;
  dq.panels = 8;
  std::vector<double> errs;
  for (int n : {12, 24}) {
    box_grid g(2, 6.0, n);
    momentum_grid mg(g);
    auto h = moyal(phase_function::sample(g, fn(F)), phase_function::sample(g, fn(G)), b);
    double e = 0.0;
    for (int s = 0; s < 5; ++s) {
      std::size_t qi = g.ravel({n / 2 - 1 + s % 2, n / 2 - s % 3, 0}), pi_ = g.ravel({n / 2 + s - 2, n / 2, 0});
      cplx d = moyal_direct(fn(F), fn(G), b, g.node(qi), mg.node(pi_), dq);
      e = std::max(e, std::abs(d - h.at(qi, pi_)));
    }
    errs.push_back(e);
  }
  CHECK(errs[1] < 5e-5);
  CHECK(errs[0] / errs[1] >= 4.0);
}

TEST_CASE("involution reverses products and the product associates", "[moyal]") {
  box_grid g(2, 6.0, 24);
  auto b = magnetic_field::uniform(2, {0.5});
  oracle::gaussian F, G, H;
  F.a = 0.5;
  F.q0 = {0.3, -0.2, 0};
  F.p0 = {0.1, 0.2, 0};
  G.a = 0.8;
  G.s = 1.2;
  G.c = cplx(0.5, 0.5);
  H.a = 0.7;
  H.q0 = {-0.4, 0.1, 0};
  H.p0 = {0.3, -0.3, 0};
  H.c = cplx(0, 1);
  auto f = phase_function::sample(g, fn(F)), k = phase_function::sample(g, fn(G)),
       h = phase_function::sample(g, fn(H));
  auto fk = moyal(f, k, b);
  CHECK(bulk_diff(involution(fk), moyal(involution(k), involution(f), b)) < 1e-5);
  CHECK(bulk_diff(moyal(fk, h, b), moyal(f, moyal(k, h, b), b)) < 2e-3);
}
