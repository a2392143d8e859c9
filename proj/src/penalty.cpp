#include "jmppc/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace jmppc {

static arma::mat first_difference(int n) {
  arma::mat d(n - 1, n, arma::fill::zeros);
  for (int i = 0; i < n - 1; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

PenaltyMatrix difference_penalty(int n_coef, int order) {
  if (order < 1) throw std::runtime_error("penalty order must be >= 1");
  if (n_coef <= order) throw std::runtime_error("penalty order must be below coefficient count");
  arma::mat theta = first_difference(n_coef);
  for (int r = 2; r <= order; ++r) theta = first_difference(n_coef - r + 1) * theta;
  PenaltyMatrix p;
  p.K = theta.t() * theta;
  p.order = order;
  p.rank = n_coef - order;
  return p;
}

double log_penalized_prior(const arma::vec& coef, double tau, const PenaltyMatrix& penalty) {
  if (!(tau > 0)) throw std::runtime_error("tau must be positive");
  if (coef.n_elem != penalty.K.n_rows)
    throw std::runtime_error("coefficient length does not match penalty");
  return 0.5 * penalty.rank * std::log(tau) -
         0.5 * tau * arma::dot(coef, penalty.K * coef);
}

}  // namespace jmppc
