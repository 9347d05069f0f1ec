#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <vector>

#include "types.hpp"

namespace magweyl {

// Gauss-Legendre rule mapped to [0,1].
struct gauss_rule {
  std::vector<double> nodes, weights;
  int order() const { return static_cast<int>(nodes.size()); }
};

namespace detail {
template <unsigned P>
gauss_rule make_rule() {
  using G = boost::math::quadrature::gauss<double, P>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  gauss_rule r;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    pts.emplace_back(x[i], w[i]);
    if (x[i] != 0.0) pts.emplace_back(-x[i], w[i]);
  }
  std::sort(pts.begin(), pts.end());
  for (auto [xi, wi] : pts) {
    r.nodes.push_back(0.5 * (xi + 1.0));
    r.weights.push_back(0.5 * wi);
  }
  return r;
}
}  // namespace detail

inline const gauss_rule& gauss_legendre(int order) {
  static const gauss_rule r1 = detail::make_rule<1>(), r2 = detail::make_rule<2>(), r3 = detail::make_rule<3>(),
                          r4 = detail::make_rule<4>(), r6 = detail::make_rule<6>(), r8 = detail::make_rule<8>(),
                          r12 = detail::make_rule<12>(), r16 = detail::make_rule<16>(),
                          r24 = detail::make_rule<24>(), r32 = detail::make_rule<32>();
  switch (order) {
    case 1: return r1;
    case 2: return r2;
    case 3: return r3;
    case 4: return r4;
    case 6: return r6;
    case 8: return r8;
    case 12: return r12;
    case 16: return r16;
    case 24: return r24;
    case 32: return r32;
    default: throw precondition_error("unsupported Gauss-Legendre order " + std::to_string(order));
  }
}

}  // namespace magweyl
