#include <doctest.h>

#include <cmath>

#include <armadillo>

#include "jmppc/penalty.hpp"

#include "test_util.hpp"

using namespace jmppc;

TEST_CASE("difference penalty has rank P - r with polynomials in its null space") {
  for (int order : {1, 2}) {
    const int P = 9;
    const PenaltyMatrix pen = difference_penalty(P, order);
    REQUIRE(pen.K.n_rows == static_cast<arma::uword>(P));
    CHECK(pen.order == order);
    CHECK(pen.rank == P - order);
    CHECK(arma::rank(pen.K) == static_cast<arma::uword>(P - order));
    CHECK(arma::norm(pen.K - pen.K.t(), "fro") == 0.0);

    // coefficient sequences polynomial in the index of degree < order are free
    for (int deg = 0; deg < order; ++deg) {
      arma::vec g(P);
      for (int j = 0; j < P; ++j) g[j] = std::pow(j + 1.0, deg);
      CHECK(std::abs(arma::as_scalar(g.t() * pen.K * g)) < 1e-10);
    }
    arma::vec quad(P);
    for (int j = 0; j < P; ++j) quad[j] = (j + 1.0) * (j + 1.0);
    if (order <= 2) {
      const double bent = arma::as_scalar(quad.t() * pen.K * quad);
      if (order == 2)
        CHECK(bent == doctest::Approx(4.0 * (P - 2)).epsilon(1e-12));  // second diffs are all 2
      else
        CHECK(bent > 1.0);
    }
  }
}

TEST_CASE("second-order penalty quadratic form matches a direct sum of squared differences") {
  const int P = 7;
  const PenaltyMatrix pen = difference_penalty(P, 2);
  arma::vec g = {0.4, -1.1, 0.3, 2.2, -0.5, 0.9, 1.4};
  double direct = 0;
  for (int j = 0; j + 2 < P; ++j) {
    const double d = g[j + 2] - 2 * g[j + 1] + g[j];
    direct += d * d;
  }
  CHECK(arma::as_scalar(g.t() * pen.K * g) == doctest::Approx(direct).epsilon(1e-12));

  const double tau = 1.7;
  const double want = 0.5 * pen.rank * std::log(tau) - 0.5 * tau * direct;
  CHECK(log_penalized_prior(g, tau, pen) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("difference penalty rejects impossible shapes") {
  expect_throw_contains([] { difference_penalty(2, 2); }, "order");
  expect_throw_contains([] { difference_penalty(5, 0); }, "order");
}
