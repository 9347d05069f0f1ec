#include <catch_amalgamated.hpp>

#include <magweyl/grid.hpp>

#include <random>

using namespace magweyl;
using Catch::Approx;

namespace {

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<cplx>& a) {
  double m = 0.0;
  for (auto v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("box grid nodes are symmetric and evenly spaced") {
  box_grid g(2, 3.0, 12);
  REQUIRE(g.delta() * g.n == Approx(2 * g.L));
  for (int i = 0; i < g.n; ++i) REQUIRE(g.coord(i) == Approx(-g.coord(g.n - 1 - i)));
  REQUIRE_THROWS_AS(box_grid(2, 3.0, 11), precondition_error);
  momentum_grid mg(g);
  REQUIRE(mg.coord(0) == Approx(-pi / g.delta()));
  REQUIRE(mg.spacing() == Approx(2 * pi / (2 * g.L)));
}

TEST_CASE("momentum-independent symbol becomes a scaled delta column") {
  box_grid g(2, 2.0, 8);
  auto f = phase_function::sample(g, [](const vec& q, const vec&) { return cplx(1.0 + q[0] * q[1], q[0]); });
  kernel k = partial_fourier_inv(f);
  long d0 = k.disp_ravel({0, 0, 0});
  for (std::size_t q = 0; q < g.size(); ++q) {
    vec x = g.node(q);
    for (std::size_t d = 0; d < k.disp_size(); ++d) {
      cplx expect = static_cast<long>(d) == d0 ? cplx(1.0 + x[0] * x[1], x[0]) / g.cell_volume() : cplx{};
      REQUIRE(std::abs(k.at(q, d) - expect) < 1e-12);
    }
  }
}

TEST_CASE("plane-wave symbol exp(ip.a) becomes a delta at x = a") {
  box_grid g(2, 2.0, 8);
  const index3 a{2, -1, 0};
  vec av{a[0] * g.delta(), a[1] * g.delta(), 0};
  auto f = phase_function::momentum(g, [av](const vec& p) { return std::polar(1.0, dot(p, av)); });
  kernel k = partial_fourier_inv(f);
  long target = k.disp_ravel(a);
  for (std::size_t d = 0; d < k.disp_size(); ++d) {
    cplx expect = static_cast<long>(d) == target ? cplx(1.0 / g.cell_volume()) : cplx{};
    REQUIRE(std::abs(k.at(0, d) - expect) < 1e-12);
  }
}

TEST_CASE("Gaussian symbol has the closed-form Gaussian kernel") {
  box_grid g(2, 8.0, 64);
  const double s = 0.5;
  auto f = phase_function::momentum(g, [s](const vec& p) { return std::exp(-s * dot(p, p)); });
  kernel k = partial_fourier_inv(f);
  double err = 0.0;
  for (std::size_t d = 0; d < k.disp_size(); ++d) {
    vec x = k.disp_vec(k.disp_unravel(d));
    double exact = std::exp(-dot(x, x) / (4 * s)) / (4 * pi * s);
    err = std::max(err, std::abs(k.at(0, d) - exact));
  }
  REQUIRE(err < 1e-10);
}

TEST_CASE("partial Fourier round trip and Parseval") {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int dim : {1, 2, 3}) {
    box_grid g(dim, 1.5, dim == 3 ? 6 : 10);
    auto f = phase_function::sample(g, [&](const vec&, const vec&) { return cplx(nd(rng), nd(rng)); });
    kernel k = partial_fourier_inv(f, -1, 0.0);
    phase_function back = partial_fourier(k);
    REQUIRE(max_abs_diff(back.data, f.data) <= 1e-12 * max_abs(f.data));

    // half-range kernel with endpoint halving round-trips too
    kernel kh = k.resized(g.n / 2, false);
    for (std::size_t d = 0; d < kh.disp_size(); ++d) {
      index3 j = kh.disp_unravel(d);
      int edges = 0;
      for (int a = 0; a < dim; ++a) edges += 2 * std::abs(j[a]) == g.n;
      if (edges) {
        long src = k.disp_ravel(j);
        for (std::size_t q = 0; q < kh.slices(); ++q) kh.at(q, d) = k.at(q, src);
      }
    }
    REQUIRE(max_abs_diff(partial_fourier(kh).data, f.data) <= 1e-12 * max_abs(f.data));

    for (std::size_t q = 0; q < g.size(); ++q) {
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t d = 0; d < k.disp_size(); ++d) lhs += std::norm(k.at(q, d));
      for (std::size_t p = 0; p < g.size(); ++p) rhs += std::norm(f.at(q, p));
      lhs *= g.cell_volume();
      rhs *= momentum_grid(g).cell_weight();
      REQUIRE(std::abs(lhs - rhs) <= 1e-12 * rhs);
    }
  }
}

TEST_CASE("truncation records the dropped tail") {
  box_grid g(1, 4.0, 32);
  auto f = phase_function::momentum(g, [](const vec& p) { return 1.0 / (1.0 + p[0] * p[0]); });
  kernel k = partial_fourier_inv(f, 4);
  REQUIRE(k.tail_mass > 1e-3);
  kernel full = partial_fourier_inv(f);
  REQUIRE(full.tail_mass == 0.0);
}
