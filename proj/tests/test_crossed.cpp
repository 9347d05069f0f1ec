#include <catch_amalgamated.hpp>

#include <magweyl/linalg.hpp>

#include <random>

using namespace magweyl;

namespace {

double max_entry(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

kernel gaussian_kernel(const box_grid& g, int m, double qw, double xw, vec shift = {}) {
  return kernel::sample(g, m, false, false, [=](const vec& q, const vec& x) {
    vec s = x - shift;
    return cplx(std::exp(-qw * dot(q, q) - xw * dot(s, s)), 0.3 * x[0] * std::exp(-qw * dot(q, q) - xw * dot(s, s)));
  });
}

kernel random_kernel(const box_grid& g, int m, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  kernel k(g, m, false, false);
  for (auto& v : k.data) v = cplx(nd(rng), nd(rng));
  return k;
}

}  // namespace

TEST_CASE("zero field, q-independent kernels: product is the periodic convolution") {
  box_grid g(2, 3.0, 16);
  auto f = phase_function::momentum(g, [](const vec& p) { return std::exp(-0.3 * dot(p, p)) * cplx(1, p[0]); });
  auto h = phase_function::momentum(g, [](const vec& p) { return 1.0 / (1.0 + dot(p, p)); });
  kernel a = partial_fourier_inv(f, -1, 0.0), b = partial_fourier_inv(h, -1, 0.0);
  kernel c = twisted_product(a, b, magnetic_field::zero(2));
  REQUIRE(c.q_independent);
  // convolution theorem through the transforms
  phase_function fc = partial_fourier(c);
  double err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) err = std::max(err, std::abs(fc.at(0, p) - f.at(0, p) * h.at(0, p)));
  REQUIRE(err <= 1e-10);
}

TEST_CASE("delta kernel acts as a unit") {
  box_grid g(2, 3.0, 12);
  kernel phi = gaussian_kernel(g, 4, 0.4, 1.0);
  phi.exact = nullptr;
  kernel unit = kernel::delta(g, 1.0, 0);
  auto b = magnetic_field::uniform(2, {0.7});
  product_options opt;
  opt.m_out = phi.m;
  kernel left = twisted_product(unit, phi, b, opt), right = twisted_product(phi, unit, b, opt);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q)
    for (std::size_t d = 0; d < phi.disp_size(); ++d) {
      e1 = std::max(e1, std::abs(left.at(q, d) - phi.at(q, d)));
      e2 = std::max(e2, std::abs(right.at(q, d) - phi.at(q, d)));
    }
  REQUIRE(e1 < 1e-14);
  REQUIRE(e2 < 1e-14);
}

namespace {

double bump(double r2, double R) { return r2 < R * R ? std::exp(-1.0 / (1 - r2 / (R * R))) : 0.0; }

// ||Rep(phi <> psi) - Rep(phi) Rep(psi)|| for compactly supported kernels on an n-grid
double homomorphism_defect(int n, const magnetic_field& b, interpolation scheme, int order = 8) {
  box_grid g(2, 4.0, n);
  const double Rx = 0.8, Rq = 1.2;
  int m = static_cast<int>(std::ceil(Rx / g.delta())) + 1;
  kernel phi = kernel::sample(g, m, false, false, [&](const vec& q, const vec& x) {
    return cplx(bump(dot(q, q), Rq) * bump(dot(x, x), Rx) * (1 + 0.3 * q[0]),
                0.2 * x[1] * bump(dot(x, x), Rx) * bump(dot(q, q), Rq));
  }, false);
  const vec c{0.4, 0, 0};
  kernel psi = kernel::sample(g, m, false, false, [&](const vec& q, const vec& x) {
    return cplx(bump(dot(q - c, q - c), Rq) * bump(dot(x, x), Rx), 0);
  }, false);
  product_options opt;
  opt.scheme = scheme;
  opt.quad_order = order;
  auto A = transversal_gauge(b, order);
  kernel prod = twisted_product(phi, psi, b, opt);
  auto P = rep_sparse(A, prod, scheme, order), F = rep_sparse(A, phi, scheme, order),
       S = rep_sparse(A, psi, scheme, order);
  return opnorm_apply(static_cast<long>(g.size()), [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
    Eigen::VectorXcd e = P * v - F * (S * v);
    return P.adjoint() * e - S.adjoint() * (F.adjoint() * e);
  });
}

}  // namespace

TEST_CASE("constant field: Rep(phi <> psi) - Rep(phi) Rep(psi) vanishes under refinement") {
  auto b = magnetic_field::uniform(2, {0.5});
  for (auto scheme : {interpolation::linear, interpolation::cubic}) {
    double e1 = homomorphism_defect(24, b, scheme), e2 = homomorphism_defect(48, b, scheme);
    INFO("defects " << e1 << " " << e2);
    REQUIRE(e2 < e1 / (scheme == interpolation::cubic ? 4.0 : 3.5));
  }
}

TEST_CASE("non-constant field: Rep(phi <> psi) - Rep(phi) Rep(psi) vanishes under refinement") {
  auto b = magnetic_field::planar([](const vec& x) { return 0.4 + 0.3 * std::exp(-dot(x, x) / 4); });
  double e1 = homomorphism_defect(24, b, interpolation::cubic), e2 = homomorphism_defect(48, b, interpolation::cubic);
  INFO("defects " << e1 << " " << e2);
  REQUIRE(e2 < e1 / 4.0);
}

TEST_CASE("exact kernels: Rep is multiplicative on even displacements") {
  box_grid g(2, 5.0, 20);
  auto b = magnetic_field::uniform(2, {0.5});
  auto A = transversal_gauge(b);
  kernel phi = gaussian_kernel(g, 6, 1.5, 2.0, {0.3, 0, 0});
  kernel psi = gaussian_kernel(g, 6, 1.2, 2.2);
  kernel prod = twisted_product(phi, psi, b);
  Eigen::MatrixXcd lhs = rep(A, prod).m, rhs = rep(A, phi).m * rep(A, psi).m;
  double err = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t c = 0; c < g.size(); ++c) {
      index3 ia = g.unravel(a), ic = g.unravel(c);
      if ((ia[0] - ic[0]) % 2 || (ia[1] - ic[1]) % 2) continue;
      err = std::max(err, std::abs(lhs(a, c) - rhs(a, c)));
    }
  REQUIRE(err <= 1e-10 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("involution is an involution and matches the adjoint") {
  box_grid g(2, 3.0, 12);
  std::mt19937 rng(3);
  kernel phi = random_kernel(g, 3, rng);
  kernel twice = twisted_involution(twisted_involution(phi));
  for (std::size_t i = 0; i < phi.data.size(); ++i) REQUIRE(twice.data[i] == phi.data[i]);

  auto b = magnetic_field::uniform(2, {0.8});
  auto A = transversal_gauge(b);
  Eigen::MatrixXcd r1 = rep(A, twisted_involution(phi)).m, r2 = rep(A, phi).m.adjoint();
  REQUIRE(opnorm(r1 - r2) <= 1e-12 * opnorm(r2));

  kernel even = kernel::sample(g, 3, false, false, [](const vec& q, const vec& x) {
    return cplx(std::exp(-dot(x, x)) * (1 + q[0] * q[0]), 0.0);
  });
  kernel fixed = twisted_involution(even);
  for (std::size_t i = 0; i < even.data.size(); ++i) REQUIRE(std::abs(fixed.data[i] - even.data[i]) < 1e-15);
  REQUIRE(rep(A, even).hermitian);
}

TEST_CASE("L1 norm") {
  box_grid g(2, 6.0, 48);
  REQUIRE(l1_norm(kernel(g, 5, false, true)) == 0.0);
  const double s = 1.3;
  kernel gk = kernel::sample(g, g.n / 2, false, true, [s](const vec&, const vec& x) { return cplx(std::exp(-s * dot(x, x))); });
  REQUIRE(std::abs(l1_norm(gk) - pi / s) < 1e-6);
  std::mt19937 rng(11);
  for (int t = 0; t < 20; ++t) {
    kernel a = random_kernel(box_grid(2, 2.0, 8), 2, rng), c = random_kernel(box_grid(2, 2.0, 8), 2, rng);
    REQUIRE(l1_norm(a + c) <= l1_norm(a) + l1_norm(c) + 1e-12);
  }
}

TEST_CASE("representation is contractive") {
  box_grid g(2, 2.0, 8);
  std::mt19937 rng(5);
  auto A = transversal_gauge(magnetic_field::uniform(2, {1.1}));
  for (int t = 0; t < 100; ++t) {
    kernel phi = random_kernel(g, 1 + t % 4, rng);
    REQUIRE(opnorm(rep(A, phi).m) <= l1_norm(phi) * (1 + 1e-10));
  }
}

TEST_CASE("multiplication operators and Fourier multipliers") {
  box_grid g(2, 3.0, 12);
  auto v = [](const vec& x) { return std::cos(x[0]) + x[1] * x[1]; };
  auto M = op_weyl(vector_potential::zero(2), phase_function::sample(g, [&](const vec& q, const vec&) { return cplx(v(q)); }));
  REQUIRE(M.hermitian);
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t c = 0; c < g.size(); ++c) {
      cplx expect = a == c ? cplx(v(g.node(a))) : cplx{};
      REQUIRE(std::abs(M.m(a, c) - expect) < 1e-12);
    }

  // periodic box: plane waves are eigenvectors with eigenvalue h(p)
  box_grid gp(2, 3.0, 12, boundary::periodic);
  auto h = [](const vec& p) { return dot(p, p) + 0.5 * std::cos(p[0]); };
  auto H = op_weyl(vector_potential::zero(2), phase_function::momentum(gp, [&](const vec& p) { return cplx(h(p)); }));
  REQUIRE(H.hermitian);
  momentum_grid mg(gp);
  for (std::size_t pi_ = 0; pi_ < gp.size(); pi_ += 7) {
    vec p = mg.node(pi_);
    Eigen::VectorXcd u(gp.size());
    for (std::size_t a = 0; a < gp.size(); ++a) u(a) = std::polar(1.0, dot(p, gp.node(a)));
    Eigen::VectorXcd r = H.m * u - h(p) * u;
    REQUIRE(r.norm() <= 1e-10 * u.norm() * std::max(1.0, h(p)));
  }
}

TEST_CASE("Toeplitz eigenvalues sample the Fourier transform on a periodic box") {
  box_grid g(1, 4.0, 32, boundary::periodic);
  kernel k = kernel::sample(g, 0, true, true, [](const vec&, const vec& x) { return cplx(std::exp(-x[0] * x[0])); });
  auto M = rep(vector_potential::zero(1), k);
  auto ev = eig(M).values;
  std::vector<double> expect;
  phase_function f = partial_fourier(k);
  for (std::size_t p = 0; p < g.size(); ++p) expect.push_back(f.at(0, p).real());
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < ev.size(); ++i) REQUIRE(std::abs(ev[i] - expect[i]) < 1e-12);
}

TEST_CASE("gauge covariance with analytic circulation") {
  box_grid g(2, 3.0, 16);
  auto b = magnetic_field::uniform(2, {0.9});
  auto A = transversal_gauge(b);
  gauge_function rho{[](const vec& x) { return x[0] * x[1]; }, [](const vec& x) { return vec{x[1], x[0], 0}; }};
  auto A2 = gauge_shift(A, rho);
  auto sym = phase_function::momentum(g, [](const vec& p) { return cplx(dot(p, p)); });
  auto M1 = op_weyl(A, sym), M2 = op_weyl(A2, sym);
  Eigen::VectorXcd u = gauge_phases(g, rho.rho);
  Eigen::MatrixXcd conj = u.asDiagonal() * M1.m * u.conjugate().asDiagonal();
  REQUIRE(max_entry(conj - M2.m) <= 1e-10);
}

TEST_CASE("quarter-turn block solver agrees with the dense solver") {
  box_grid g(2, 4.0, 12);
  auto A = transversal_gauge(magnetic_field::uniform(2, {1.0}));
  auto H = op_weyl(A, phase_function::momentum(g, [](const vec& p) { return cplx(dot(p, p)); }));
  H.m += multiplication(g, [](const vec& x) { return std::exp(-dot(x, x)); }).m;
  REQUIRE(rotation_split::applies(H));
  eig_options opt;
  opt.vectors = true;
  opt.window = std::make_pair(-1.0, 9.0);
  auto blocks = eig(H, opt);
  opt.use_symmetry = false;
  auto dense = eig(H, opt);
  REQUIRE(blocks.values.size() == dense.values.size());
  for (std::size_t i = 0; i < dense.values.size(); ++i) REQUIRE(std::abs(blocks.values[i] - dense.values[i]) < 1e-10);
  for (long i = 0; i < blocks.vectors.cols(); ++i) {
    Eigen::VectorXcd v = blocks.vectors.col(i);
    REQUIRE(std::abs(v.norm() - 1.0) < 1e-10);
    REQUIRE((H.m * v - blocks.values[i] * v).norm() < 1e-9);
  }
}

TEST_CASE("unitized kernels and matrix export") {
  box_grid g(1, 2.0, 8);
  std::mt19937 rng(9);
  unitized_kernel u{cplx(2.0, 0.5), random_kernel(g, 2, rng)};
  REQUIRE(u.norm() == Catch::Approx(std::abs(u.mu) + l1_norm(u.phi)));
  auto M = u.represent(vector_potential::zero(1));
  auto path = std::string("crossed_export.bin");
  export_binary(M, path);
  auto back = import_binary(path);
  REQUIRE(max_entry(back.m - M.m) == 0.0);
  std::remove(path.c_str());
}
