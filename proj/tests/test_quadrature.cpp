#include <doctest.h>

#include <cmath>

#include "jmppc/quadrature.hpp"

using namespace jmppc;

TEST_CASE("gauss-legendre nodes are symmetric and weights sum to two") {
  for (int order : {5, 15, 31}) {
    const QuadratureRule rule = QuadratureRule::gauss_legendre(order);
    REQUIRE(rule.nodes.n_elem == static_cast<arma::uword>(order));
    CHECK(std::abs(arma::sum(rule.weights) - 2.0) < 1e-13);
    for (int i = 0; i < order; ++i)
      CHECK(std::abs(rule.nodes(i) + rule.nodes(order - 1 - i)) < 1e-13);
  }
}

TEST_CASE("gauss-legendre integrates polynomials up to degree 2n-1 exactly") {
  const QuadratureRule rule = QuadratureRule::gauss_legendre(8);
  // integral of x^k over [-1,1]: 0 for odd k, 2/(k+1) for even k
  for (int k = 0; k <= 15; ++k) {
    double got = 0;
    for (arma::uword i = 0; i < rule.nodes.n_elem; ++i)
      got += rule.weights(i) * std::pow(rule.nodes(i), k);
    const double want = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
    CHECK(std::abs(got - want) < 1e-13);
  }
}

TEST_CASE("panel integration splits at interior kinks") {
  // |x - 1| has a kink at 1; panels on both sides integrate it exactly
  const auto f = [](double x) { return std::abs(x - 1.0); };
  const QuadratureRule& rule = QuadratureRule::legendre15();
  const double got = integrate_panels(f, 0.0, 3.0, {1.0}, rule);
  CHECK(std::abs(got - 2.5) < 1e-12);
  // out-of-range and unsorted cuts are ignored
  const double got2 = integrate_panels(f, 0.0, 3.0, {7.0, 1.0, -2.0}, rule);
  CHECK(std::abs(got2 - 2.5) < 1e-12);
}

TEST_CASE("smooth integrals converge to closed forms") {
  const QuadratureRule& rule = QuadratureRule::legendre15();
  const double got = integrate_panels([](double x) { return std::exp(x); }, 0.0, 2.0, {}, rule);
  CHECK(std::abs(got - (std::exp(2.0) - 1.0)) < 1e-12);
}
