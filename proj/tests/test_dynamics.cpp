#include <magweyl/dynamics.hpp>

#include <catch_amalgamated.hpp>

#include <random>

using namespace magweyl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

eigensystem landau_system(double L = 6.0, int n = 24) {
  box_grid g(2, L, n, boundary::truncated);
  return eigensystem::of(assemble({symbol::laplacian(2), magnetic_field::uniform(2, {1.0}), std::nullopt, nullptr, g}));
}

}  // namespace

TEST_CASE("energy window", "[dynamics]") {
  CHECK_THROWS_AS(energy_window(1.0, 0.5, 2.0, 3.0), precondition_error);
  CHECK_THROWS_AS(energy_window(0.0, 1.0, 2.0, 2.0), precondition_error);
  CHECK_NOTHROW(energy_window(0.0, 1.0, 1.0, 2.0));

  energy_window eta(0.0, 1.0, 2.0, 4.0);
  CHECK(eta(-1.0) == 0.0);
  CHECK(eta(0.0) == 0.0);
  CHECK(eta(1.0) == 1.0);
  CHECK(eta(1.5) == 1.0);
  CHECK(eta(2.0) == 1.0);
  CHECK(eta(4.0) == 0.0);
  CHECK_THAT(eta(0.5), WithinAbs(0.5, 1e-15));
  CHECK_THAT(eta(3.0), WithinAbs(0.5, 1e-15));

  // C^2: first and second differences vanish at the four junctions
  const double h = 1e-4;
  for (double e : {0.0, 1.0, 2.0, 4.0}) {
    CHECK(std::abs(eta(e + h) - eta(e - h)) / (2 * h) < 1e-6);
    CHECK(std::abs(eta(e + h) - 2 * eta(e) + eta(e - h)) / (h * h) < 1e-2);
  }
  // derivative bounds, attained on the narrower edge
  auto [d1, d2] = eta.derivative_bounds();
  double m1 = 0.0, m2 = 0.0;
  for (int i = 1; i < 40000; ++i) {
    const double e = -0.5 + 5.0 * i / 40000;
    m1 = std::max(m1, std::abs(eta(e + h) - eta(e - h)) / (2 * h));
    m2 = std::max(m2, std::abs(eta(e + h) - 2 * eta(e) + eta(e - h)) / (h * h));
  }
  CHECK(m1 <= d1 * (1 + 1e-6));
  CHECK(m2 <= d2 * (1 + 1e-4));
  CHECK_THAT(m1, WithinRel(d1, 1e-4));
  CHECK_THAT(m2, WithinRel(d2, 1e-3));
}

TEST_CASE("region windows", "[dynamics]") {
  box_grid g(2, 4.0, 8, boundary::truncated);
  CHECK_THROWS_AS(region_window::from(g, [](const vec& x) { return x[0] > 10; }), precondition_error);
  auto all = region_window::whole(g);
  CHECK(all.count() == g.size());
  auto right = region_window::strip(g, 0, 1, 2.0, 4.0);
  CHECK(right.count() == 16);  // two columns of eight
  auto narrow = region_window::strip(g, 0, 1, 1.0, 4.0);
  CHECK(narrow.count() == 8);
  CHECK(narrow.subset_of(right));
  CHECK(right.subset_of(all));
  CHECK(!all.subset_of(right));
  auto top = region_window::strip(g, 1, 1, 2.0, 4.0);
  auto bottom = region_window::strip(g, 1, -1, 2.0, 4.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(!(top.inside[i] && bottom.inside[i]));
    CHECK(bool(top.inside[i]) == (g.node(i)[1] > 2.0));
  }
}

TEST_CASE("functional calculus", "[dynamics]") {
  auto es = landau_system();
  const long n = es.U.rows();
  const double lo = es.values.front(), hi = es.values.back();

  auto id = functional_calculus(es, energy_window(lo - 2, lo - 1, hi + 1, hi + 2));
  CHECK((id.m - Eigen::MatrixXcd::Identity(n, n)).norm() < 1e-10);

  auto zero = functional_calculus(es, energy_window(hi + 1, hi + 2, hi + 3, hi + 4));
  CHECK(zero.m.norm() == 0.0);

  energy_window eta(0.5, 1.5, 2.5, 3.5);
  auto P = functional_calculus(es, eta);
  CHECK(P.hermitian);
  double tr = 0.0;
  for (double v : es.values) tr += eta(v);
  CHECK_THAT(P.m.trace().real(), WithinAbs(tr, 1e-9));
  // commutes with H
  Eigen::MatrixXcd H = es.U * Eigen::Map<const Eigen::VectorXd>(es.values.data(), n).cast<cplx>().asDiagonal() *
                       es.U.adjoint();
  CHECK((H * P.m - P.m * H).norm() < 1e-9 * H.norm());

  // sharp plateau around one Landau level acts as a projection on the bulk
  energy_window sharp(0.8, 0.9, 1.1, 1.2);
  auto Q = functional_calculus(es, sharp);
  bool gap = true;
  for (double v : es.values) gap = gap && (sharp(v) == 0.0 || sharp(v) == 1.0);
  if (gap) CHECK((Q.m * Q.m - Q.m).norm() < 1e-9);
}

TEST_CASE("localization norm", "[dynamics]") {
  auto es = landau_system();
  const box_grid& g = *es.grid;
  energy_window eta(0.5, 0.8, 1.2, 1.5);
  auto all = region_window::whole(g);
  double mx = 0.0;
  for (double v : es.values) mx = std::max(mx, eta(v));
  CHECK_THAT(localization_norm(all, es, eta), WithinAbs(mx, 1e-12));

  const double top = es.values.back();
  CHECK(localization_norm(all, es, energy_window(top + 1, top + 2, top + 3, top + 4)) == 0.0);

  double prev = 0.0;
  for (double w : {0.5, 1.0, 2.0, 4.0, 6.0}) {
    const double v = localization_norm(region_window::strip(g, 0, 1, w, g.L), es, eta);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= 1.0 + 1e-12);
    prev = v;
  }
}

TEST_CASE("propagation", "[dynamics]") {
  SECTION("basic identities") {
    auto es = landau_system();
    const long n = es.U.rows();
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd u(n);
    for (long i = 0; i < n; ++i) u(i) = cplx(nd(gen), nd(gen));
    auto out = propagate(es, u, {0.0, 0.7, 3.0, 25.0});
    CHECK((out[0] - u).norm() < 1e-12 * u.norm());
    for (const auto& v : out) CHECK_THAT(v.norm(), WithinRel(u.norm(), 1e-12));

    Eigen::VectorXcd e = es.U.col(7);
    const double t = 1.3;
    auto et = propagate(es, e, {t});
    CHECK((et[0] - std::polar(1.0, -t * es.values[7]) * e).norm() < 1e-12);

    // group property
    auto a = propagate(es, u, {0.4})[0];
    auto b = propagate(es, a, {0.9})[0];
    CHECK((b - propagate(es, u, {1.3})[0]).norm() < 1e-10 * u.norm());
  }
  SECTION("free Gaussian spreads as sigma^2 + (t / sigma)^2") {
    box_grid g(2, 8.0, 32, boundary::periodic);
    auto es = eigensystem::of(assemble({symbol::laplacian(2), magnetic_field::zero(2), std::nullopt, nullptr, g}));
    const double s0 = 1.0;
    Eigen::VectorXcd u(static_cast<long>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const vec x = g.node(i);
      u(static_cast<long>(i)) = std::exp(-(x[0] * x[0] + x[1] * x[1]) / (4 * s0 * s0));
    }
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    auto out = propagate(es, u, ts);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      double m = 0.0, x2 = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = std::norm(out[k](static_cast<long>(i)));
        m += w;
        x2 += w * g.node(i)[0] * g.node(i)[0];
      }
      const double expect = s0 * s0 + ts[k] * ts[k] / (s0 * s0);
      CHECK_THAT(x2 / m, WithinRel(expect, 1e-2));
    }
  }
}

TEST_CASE("transit times", "[dynamics]") {
  box_grid g(2, 6.0, 24, boundary::truncated);
  energy_window eta(0.5, 1.0, 2.0, 4.0);
  auto t = transit_times(symbol::laplacian(2), g, eta);
  REQUIRE(t.size() == 64);
  CHECK(t.front() == 0.0);
  // sup |2p| over |p|^2 <= 4 on the momentum lattice is at most 4
  CHECK(t.back() >= 4 * g.L / 4.0 - 1e-12);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
}

TEST_CASE("non-propagation", "[dynamics]") {
  auto es = landau_system();
  const box_grid& g = *es.grid;
  energy_window eta(2.0, 2.5, 3.5, 4.0);
  auto W = region_window::strip(g, 0, 1, g.L / 4, g.L);
  auto times = transit_times(symbol::laplacian(2), g, eta);

  auto worst = worst_state(W, es, eta);
  auto r = non_propagation(es, eta, W, worst, times);
  CHECK(r.holds());
  CHECK_THAT(r.mass.front(), WithinRel(r.bound, 1e-9));
  CHECK_THAT(r.sup, WithinRel(r.bound, 1e-9));

  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd u(es.U.rows());
  for (long i = 0; i < u.size(); ++i) u(i) = cplx(nd(gen), nd(gen));
  auto rr = non_propagation(es, eta, W, u, times);
  CHECK(rr.holds());
  CHECK(rr.sup <= rr.bound + 1e-10);

  CHECK_THROWS_AS(non_propagation(es, eta, W, Eigen::VectorXcd::Zero(u.size()), times), precondition_error);
  CHECK(r.text().find("bound_holds: 1") != std::string::npos);

  const std::string path = "propagation_test.csv";
  r.write_csv(path);
  std::ifstream is(path);
  std::string line;
  int lines = 0;
  std::getline(is, line);
  CHECK(line == "t,localized_mass");
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 64);
  std::remove(path.c_str());
}
