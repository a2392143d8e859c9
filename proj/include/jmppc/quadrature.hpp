#pragma once

#include <functional>
#include <vector>

#include <armadillo>

namespace jmppc {

// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  arma::vec nodes;
  arma::vec weights;
  int order = 0;

  static QuadratureRule gauss_legendre(int order);
  static const QuadratureRule& legendre15();
};

// Integrates f over [a, b], splitting at the interior cut points that fall
// strictly inside the interval (cuts need not be sorted or in range).
double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& cuts, const QuadratureRule& rule);

}  // namespace jmppc
