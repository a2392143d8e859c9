#pragma once

#include <armadillo>

namespace jmppc {

struct PenaltyMatrix {
  arma::mat K;  // Theta_r' Theta_r for the r-th difference matrix Theta_r
  int order = 0;
  int rank = 0;  // P - order
};

PenaltyMatrix difference_penalty(int n_coef, int order);

// log of tau^{rank/2} exp(-tau/2 g'Kg), dropping constants
double log_penalized_prior(const arma::vec& coef, double tau, const PenaltyMatrix& penalty);

}  // namespace jmppc
