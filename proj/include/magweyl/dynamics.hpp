#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace magweyl {

// eta with eta = 1 on [plateau_lo, plateau_hi], 0 outside (support_lo, support_hi), quintic C^2 edges.
struct energy_window {
  double support_lo = 0.0, plateau_lo = 0.0, plateau_hi = 0.0, support_hi = 0.0;

  energy_window() = default;
  energy_window(double slo, double plo, double phi, double shi)
      : support_lo(slo), plateau_lo(plo), plateau_hi(phi), support_hi(shi) {
    if (!(slo < plo && plo <= phi && phi < shi))
      throw precondition_error("energy window needs support_lo < plateau_lo <= plateau_hi < support_hi");
  }
  static double edge(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (10 + t * (-15 + 6 * t));
  }
  double operator()(double e) const {
    if (e <= support_lo || e >= support_hi) return 0.0;
    if (e < plateau_lo) return edge((e - support_lo) / (plateau_lo - support_lo));
    if (e > plateau_hi) return edge((support_hi - e) / (support_hi - plateau_hi));
    return 1.0;
  }
  // sup |eta'| and sup |eta''|
  std::pair<double, double> derivative_bounds() const {
    const double w = std::min(plateau_lo - support_lo, support_hi - plateau_hi);
    return {1.875 / w, 10.0 / std::sqrt(3.0) / (w * w)};
  }
};

// Diagonal 0/1 indicator of a set of grid nodes.
struct region_window {
  box_grid g;
  std::vector<char> inside;

  std::size_t count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)); }

  static region_window from(const box_grid& g, const std::function<bool(const vec&)>& pred) {
    region_window w{g, std::vector<char>(g.size(), 0)};
    for (std::size_t i = 0; i < g.size(); ++i) w.inside[i] = pred(g.node(i)) ? 1 : 0;
    if (w.count() == 0) throw precondition_error("region window is empty");
    return w;
  }
  // {side * x_axis > edge - width}, restricted to |x_k| <= edge for the other axes.
  static region_window strip(const box_grid& g, int axis, int side, double width, double edge) {
    return from(g, [=](const vec& x) {
      for (int k = 0; k < g.dim; ++k)
        if (std::abs(x[k]) > edge) return false;
      return side * x[axis] > edge - width;
    });
  }
  static region_window whole(const box_grid& g) {
    return from(g, [](const vec&) { return true; });
  }
  bool subset_of(const region_window& o) const {
    for (std::size_t i = 0; i < inside.size(); ++i)
      if (inside[i] && !o.inside[i]) return false;
    return true;
  }
};

// Full eigendecomposition H = U diag(values) U*.
struct eigensystem {
  std::vector<double> values;
  Eigen::MatrixXcd U;
  std::optional<box_grid> grid;

  static eigensystem of(const operator_matrix& H) {
    if (H.size() > eig_cap) throw precondition_error("dimension exceeds the dense cap for a full decomposition");
    if (!H.hermitian) throw precondition_error("functional calculus needs a Hermitian matrix");
    eig_options o;
    o.vectors = true;
    auto e = eig(H, o);
    return {std::move(e.values), std::move(e.vectors), H.grid};
  }
  // Columns with eta(lambda) != 0 and their weights.
  std::pair<std::vector<long>, Eigen::VectorXd> support(const energy_window& eta) const {
    std::vector<long> cols;
    std::vector<double> w;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = eta(values[i]);
      if (v != 0.0) {
        cols.push_back(static_cast<long>(i));
        w.push_back(v);
      }
    }
    return {cols, Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<long>(w.size()))};
  }
};

inline operator_matrix functional_calculus(const eigensystem& es, const energy_window& eta) {
  auto [cols, w] = es.support(eta);
  const long n = es.U.rows();
  operator_matrix M;
  M.grid = es.grid;
  M.m = Eigen::MatrixXcd::Zero(n, n);
  if (!cols.empty()) {
    Eigen::MatrixXcd Us(n, static_cast<long>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) Us.col(static_cast<long>(c)) = es.U.col(cols[c]);
    M.m = Us * w.asDiagonal() * Us.adjoint();
  }
  M.mark_hermitian();
  return M;
}

inline operator_matrix functional_calculus(const operator_matrix& H, const energy_window& eta) {
  return functional_calculus(eigensystem::of(H), eta);
}

// || chi_W eta(H) ||
inline double localization_norm(const region_window& W, const eigensystem& es, const energy_window& eta) {
  auto [cols, w] = es.support(eta);
  if (cols.empty()) return 0.0;
  const long s = static_cast<long>(cols.size());
  Eigen::MatrixXcd B(static_cast<long>(W.count()), s);
  long r = 0;
  for (std::size_t a = 0; a < W.inside.size(); ++a) {
    if (!W.inside[a]) continue;
    for (long c = 0; c < s; ++c) B(r, c) = es.U(static_cast<long>(a), cols[c]) * w(c);
    ++r;
  }
  Eigen::MatrixXcd G = B.adjoint() * B;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sol(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, sol.eigenvalues().maxCoeff()));
}

// e^{-itH} u0 for each t.
inline std::vector<Eigen::VectorXcd> propagate(const eigensystem& es, const Eigen::VectorXcd& u0,
                                               const std::vector<double>& times) {
  const Eigen::VectorXcd c = es.U.adjoint() * u0;
  const double n0 = u0.norm();
  std::vector<Eigen::VectorXcd> out;
  for (double t : times) {
    Eigen::VectorXcd ct(c.size());
    for (long i = 0; i < c.size(); ++i) ct(i) = std::polar(1.0, -t * es.values[static_cast<std::size_t>(i)]) * c(i);
    out.push_back(es.U * ct);
    if (std::abs(out.back().norm() - n0) > 1e-10 * std::max(1.0, n0))
      throw numerical_error("propagation lost unitarity at t = " + std::to_string(t));
  }
  return out;
}

// 64 points over [0, 4 L / sup |grad h|], the supremum taken over momenta with h(p) <= support_hi.
inline std::vector<double> transit_times(const symbol& h, const box_grid& g, const energy_window& eta, int points = 64) {
  momentum_grid mg(g);
  double vmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const vec p = mg.node(i);
    if (h(p) > eta.support_hi) continue;
    const vec gr = h.grad(p);
    vmax = std::max(vmax, norm(gr));
  }
  if (vmax == 0.0) throw precondition_error("no group velocity on the energy window");
  const double T = 4 * g.L / vmax;
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i) t[i] = T * i / (points - 1);
  return t;
}

struct non_propagation_report {
  std::vector<double> times, mass;  // || chi_W e^{-itH} eta(H) u || / ||u||
  double sup = 0.0;
  double bound = 0.0;  // || chi_W eta(H) ||
  bool holds() const { return sup <= bound + 1e-10; }

  std::string text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "localization_norm: " << bound << "\nsup_localized_mass: " << sup << "\nbound_holds: " << (holds() ? 1 : 0)
       << "\ntime_points: " << times.size() << "\nhorizon: " << (times.empty() ? 0.0 : times.back()) << "\n";
    return os.str();
  }
  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw precondition_error("cannot write " + path);
    os << std::setprecision(17) << "t,localized_mass\n";
    for (std::size_t i = 0; i < times.size(); ++i) os << times[i] << "," << mass[i] << "\n";
  }
};

inline non_propagation_report non_propagation(const eigensystem& es, const energy_window& eta,
                                              const region_window& W, const Eigen::VectorXcd& u,
                                              const std::vector<double>& times) {
  non_propagation_report r;
  r.times = times;
  r.bound = localization_norm(W, es, eta);
  const double un = u.norm();
  if (un == 0.0) throw precondition_error("state is zero");
  auto [cols, w] = es.support(eta);
  Eigen::VectorXcd c(static_cast<long>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) c(static_cast<long>(k)) = w(static_cast<long>(k)) * es.U.col(cols[k]).dot(u);
  for (double t : times) {
    double m = 0.0;
    if (!cols.empty()) {
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(es.U.rows());
      for (std::size_t k = 0; k < cols.size(); ++k)
        v += std::polar(1.0, -t * es.values[static_cast<std::size_t>(cols[k])]) * c(static_cast<long>(k)) *
             es.U.col(cols[k]);
      for (std::size_t a = 0; a < W.inside.size(); ++a)
        if (W.inside[a]) m += std::norm(v(static_cast<long>(a)));
    }
    r.mass.push_back(std::sqrt(m) / un);
    r.sup = std::max(r.sup, r.mass.back());
  }
  return r;
}

// Right singular vector of chi_W eta(H) for its largest singular value.
inline Eigen::VectorXcd worst_state(const region_window& W, const eigensystem& es, const energy_window& eta) {
  auto [cols, w] = es.support(eta);
  if (cols.empty()) return Eigen::VectorXcd::Unit(es.U.rows(), 0);
  const long s = static_cast<long>(cols.size());
  Eigen::MatrixXcd B(static_cast<long>(W.count()), s);
  long r = 0;
  for (std::size_t a = 0; a < W.inside.size(); ++a) {
    if (!W.inside[a]) continue;
    for (long c = 0; c < s; ++c) B(r, c) = es.U(static_cast<long>(a), cols[c]) * w(c);
    ++r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sol(B.adjoint() * B);
  Eigen::VectorXcd top = sol.eigenvectors().col(s - 1);
  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(es.U.rows());
  for (long c = 0; c < s; ++c) u += top(c) * es.U.col(cols[c]);
  return u;
}

}  // namespace magweyl
