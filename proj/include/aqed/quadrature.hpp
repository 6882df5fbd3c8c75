#pragma once

#include <functional>
#include <vector>

namespace aqed {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// Gauss-Legendre rule with `order` nodes mapped onto [a, b].
QuadratureRule gauss_legendre(int order, double a, double b);

/// Composite Gauss-Legendre: `panels` equal panels of `order` nodes each on [a, b].
QuadratureRule composite_gauss_legendre(int panels, int order, double a, double b);

/// Concatenates rules over adjacent intervals.
QuadratureRule concatenate(const QuadratureRule& lhs, const QuadratureRule& rhs);

}  // namespace aqed
