#pragma once

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <vector>

#include "crossed.hpp"

namespace magweyl {

struct eigen_result {
  std::vector<double> values;
  Eigen::MatrixXcd vectors;  // columns, empty when not requested
};

// Eigenpairs of a Hermitian matrix, optionally restricted to the half-open window (lo, hi].
inline eigen_result eigh(Eigen::MatrixXcd a, std::optional<std::pair<double, double>> window = std::nullopt,
                         bool vectors = false) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  eigen_result r;
  if (n == 0) return r;
  std::vector<double> w(n);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  Eigen::MatrixXcd z;
  if (vectors) z.resize(n, window ? n : n);
  lapack_int m = 0;
  const char range = window ? 'V' : 'A';
  const double vl = window ? window->first : 0.0, vu = window ? window->second : 0.0;
  lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', range, 'U', n, a.data(), n, vl, vu, 0, 0,
                                   0.0, &m, w.data(), vectors ? z.data() : nullptr, n, isuppz.data());
  if (info != 0) throw numerical_error("Hermitian eigensolver failed, info " + std::to_string(info));
  r.values.assign(w.begin(), w.begin() + m);
  if (vectors) r.vectors = z.leftCols(m);
  return r;
}

// ---------------------------------------------------------------- quarter-turn symmetry

// Square 2D grids with n even have no fixed node under (x1, x2) -> (-x2, x1);
// an operator commuting with that rotation splits into four blocks.
struct rotation_split {
  box_grid g;
  std::vector<std::size_t> reps;  // one node per orbit, quadrant x1 < 0, x2 < 0

  explicit rotation_split(const box_grid& grid) : g(grid) {
    for (int i1 = 0; i1 < g.n / 2; ++i1)
      for (int i0 = 0; i0 < g.n / 2; ++i0) reps.push_back(g.ravel({i0, i1, 0}));
  }
  std::size_t rotate(std::size_t a) const {
    index3 i = g.unravel(a);
    return g.ravel({g.n - 1 - i[1], i[0], 0});
  }
  std::array<std::size_t, 4> orbit(std::size_t a) const {
    std::array<std::size_t, 4> o{a, 0, 0, 0};
    for (int j = 1; j < 4; ++j) o[j] = rotate(o[j - 1]);
    return o;
  }

  static bool applies(const operator_matrix& M, double tol = 1e-12) {
    if (!M.grid || M.grid->dim != 2 || M.grid->n % 2 || !M.hermitian) return false;
    rotation_split s(*M.grid);
    const double scale = M.m.cwiseAbs().maxCoeff();
    const long n = M.m.rows();
    std::vector<std::size_t> p(n);
    for (long a = 0; a < n; ++a) p[a] = s.rotate(a);
    for (long b = 0; b < n; ++b)
      for (long a = 0; a < n; ++a)
        if (std::abs(M.m(p[a], p[b]) - M.m(a, b)) > tol * scale) return false;
    return true;
  }

  // B_k[a, b] = Sum_m i^{-k m} M[a, P^m b] over orbit representatives.
  Eigen::MatrixXcd block(const Eigen::MatrixXcd& M, int k) const {
    const long r = static_cast<long>(reps.size());
    Eigen::MatrixXcd B(r, r);
    const cplx ph[4] = {1.0, std::pow(cplx(0, -1), k), std::pow(cplx(0, -1), 2 * k), std::pow(cplx(0, -1), 3 * k)};
    for (long b = 0; b < r; ++b) {
      auto o = orbit(reps[b]);
      for (long a = 0; a < r; ++a) {
        cplx s{};
        for (int m = 0; m < 4; ++m) s += ph[m] * M(reps[a], o[m]);
        B(a, b) = s;
      }
    }
    return B;
  }

  // Lifts block coefficients c to the full grid: Sum_a c_a (1/2) Sum_j i^{-k j} e_{P^j a}.
  Eigen::MatrixXcd lift(const Eigen::MatrixXcd& c, int k) const {
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(g.size(), c.cols());
    const cplx ph[4] = {1.0, std::pow(cplx(0, -1), k), std::pow(cplx(0, -1), 2 * k), std::pow(cplx(0, -1), 3 * k)};
    for (std::size_t a = 0; a < reps.size(); ++a) {
      auto o = orbit(reps[a]);
      for (int j = 0; j < 4; ++j) v.row(o[j]) = 0.5 * ph[j] * c.row(a);
    }
    return v;
  }
};

struct eig_options {
  std::optional<std::pair<double, double>> window;
  bool vectors = false;
  bool use_symmetry = true;
};

// Sorted eigenvalues (and vectors) of a Hermitian operator matrix.
inline eigen_result eig(const operator_matrix& M, const eig_options& opt = {}) {
  if (!M.hermitian) throw precondition_error("eig needs a Hermitian matrix");
  if (opt.use_symmetry && M.m.rows() >= 64 && rotation_split::applies(M)) {
    rotation_split s(*M.grid);
    std::vector<std::pair<double, Eigen::VectorXcd>> all;
    eigen_result out;
    for (int k = 0; k < 4; ++k) {
      eigen_result r = eigh(s.block(M.m, k), opt.window, opt.vectors);
      Eigen::MatrixXcd lifted;
      if (opt.vectors) lifted = s.lift(r.vectors, k);
      for (std::size_t i = 0; i < r.values.size(); ++i)
        all.emplace_back(r.values[i], opt.vectors ? Eigen::VectorXcd(lifted.col(i)) : Eigen::VectorXcd());
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [v, _] : all) out.values.push_back(v);
    if (opt.vectors) {
      out.vectors.resize(M.m.rows(), static_cast<long>(all.size()));
      for (std::size_t i = 0; i < all.size(); ++i) out.vectors.col(i) = all[i].second;
    }
    return out;
  }
  return eigh(M.m, opt.window, opt.vectors);
}

// ---------------------------------------------------------------- norms and inverses

// Largest singular value of E by Lanczos on E* E with full reorthogonalization;
// apply(v) must return E* E v.
template <class Apply>
double opnorm_apply(long n, Apply&& apply, int max_steps = 60, double tol = 1e-12) {
  if (n == 0) return 0.0;
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(n);
  for (long i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
  v.normalize();
  const int steps = static_cast<int>(std::min<long>(max_steps, n));
  Eigen::MatrixXcd Q(n, steps);
  std::vector<double> alpha, beta;
  double prev = -1.0, est = 0.0;
  for (int j = 0; j < steps; ++j) {
    Q.col(j) = v;
    Eigen::VectorXcd w = apply(v);
    double a = std::real(v.dot(w));
    alpha.push_back(a);
    for (int rep = 0; rep < 2; ++rep) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).adjoint() * w);
    double bnorm = w.norm();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j + 1, j + 1);
    for (int i = 0; i <= j; ++i) {
      T(i, i) = alpha[i];
      if (i < j) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    est = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (bnorm <= 1e-14 * std::max(est, 1e-300) || (prev >= 0 && std::abs(est - prev) <= tol * est)) break;
    prev = est;
    beta.push_back(bnorm);
    v = w / bnorm;
  }
  return std::sqrt(std::max(est, 0.0));
}

inline double opnorm(const Eigen::MatrixXcd& e, int max_steps = 60, double tol = 1e-12) {
  return opnorm_apply(
      e.cols(), [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return e.adjoint() * (e * v); }, max_steps, tol);
}

inline double opnorm(const operator_matrix& M) { return opnorm(M.m); }

inline Eigen::MatrixXcd inverse(Eigen::MatrixXcd a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  std::vector<lapack_int> piv(n);
  lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, a.data(), n, piv.data());
  if (info != 0) throw numerical_error("singular matrix in inverse");
  info = LAPACKE_zgetri(LAPACK_COL_MAJOR, n, a.data(), n, piv.data());
  if (info != 0) throw numerical_error("matrix inversion failed");
  return a;
}

}  // namespace magweyl
