#pragma once

#include <string>
#include <vector>

#include <armadillo>

#include "jmppc/model_spec.hpp"

namespace jmppc {

struct ParameterDraw {
  arma::vec beta;
  double sigma = 1.0;
  arma::vec gamma;     // survival covariate coefficients (may be empty)
  double alpha = 0.0;  // association coefficient
  arma::vec gamma_h0;  // log baseline-hazard spline coefficients (empty for weibull)
  arma::mat D;         // random-effects covariance
  double tau = 0.0;    // smoothness precision (0 when not sampled)
};

struct PosteriorDraws {
  std::vector<ParameterDraw> draws;
  // optional per-draw random effects; b[k] is q x n with columns following b_subject_ids
  std::vector<arma::mat> b;
  std::vector<std::string> b_subject_ids;

  std::size_t size() const { return draws.size(); }
  bool has_b() const { return !b.empty(); }
};

void validate_draws(const PosteriorDraws& draws, const ModelEval& model);

// columns beta.1..p, sigma, gamma.1..g, alpha.1, gh0.1..P, D.i.j (i<=j), tau
void save_draws(const PosteriorDraws& draws, const std::string& theta_path,
                const std::string& b_path = "");
PosteriorDraws load_posterior_draws(const ModelEval& model, const std::string& theta_path,
                                    const std::string& b_path = "");

}  // namespace jmppc
