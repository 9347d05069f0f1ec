#pragma once

#include <magweyl/types.hpp>

#include <cmath>
#include <complex>

namespace oracle {

using magweyl::cplx;
using magweyl::vec;

// Phase-space Gaussian c * prod_k exp(-a (s^2 (q_k - q0_k)^2 + (p_k - p0_k)^2 / s^2)).
struct gaussian {
  double a = 1.0, s = 1.0;
  vec q0{}, p0{};
  cplx c = 1.0;
  int dim = 2;

  cplx operator()(const vec& q, const vec& p) const {
    double e = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double u = s * (q[k] - q0[k]), v = (p[k] - p0[k]) / s;
      e += u * u + v * v;
    }
    return c * std::exp(-a * e);
  }
};

// Field-free Weyl composition of two Gaussians sharing scale and centre.
// Per axis: e^{-a r^2} # e^{-b r^2} = e^{-(a+b)/(1+ab) r^2} / (1+ab), r^2 = q^2 + p^2 (harmonic-oscillator semigroup).
inline gaussian compose(const gaussian& f, const gaussian& g) {
  gaussian r = f;
  r.a = (f.a + g.a) / (1 + f.a * g.a);
  r.c = f.c * g.c * std::pow(1 + f.a * g.a, -f.dim);
  return r;
}

}  // namespace oracle
