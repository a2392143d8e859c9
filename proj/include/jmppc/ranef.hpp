#pragma once

#include "jmppc/draws.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/quadrature.hpp"
#include "jmppc/rng.hpp"

namespace jmppc {

struct MHConfig {
  int n_iterations = 1500;
  int burn_in = 500;
  int thinning = 5;
  double proposal_scale = 1.0;   // multiplies the (2.38^2/q) D covariance
  bool adapt = true;             // Robbins-Monro during burn-in, frozen after
  double target_acceptance = 0.234;
};

// draw b ~ N(0, D); throws when D has no Cholesky factor
arma::vec sample_prior_random_effects(const arma::mat& D, RngStream& rng);

// Unnormalized log density of b given the subject's data up to t_L, the event
// state at t_L, and one parameter draw:
//   log p(y up to t_L | b) - H(0, t_L) + delta * log h(t_L) + log p(b)
// Precomputes designs and quadrature so repeated evaluations are cheap.
class ConditionalTarget {
 public:
  ConditionalTarget(const ModelEval& model, const SubjectRecord& subject, double t_L, int delta,
                    const ParameterDraw& theta,
                    const QuadratureRule& quad = QuadratureRule::legendre15());
  double log_density(const arma::vec& b) const;
  int q() const { return static_cast<int>(prior_chol_.n_rows); }
  const arma::mat& prior_chol() const { return prior_chol_; }

 private:
  double alpha_ = 0;
  double sigma2_ = 1;
  arma::vec y_resid_fixed_;  // y - X beta
  arma::mat Z_;
  arma::vec quad_w_;         // quadrature weights
  arma::vec quad_c_;         // per-node log-hazard part free of b
  arma::mat quad_AZ_;        // per-node association rows for b
  bool has_event_ = false;
  double event_c_ = 0;
  arma::rowvec event_az_;
  arma::mat prior_chol_;     // lower Cholesky of D
  double prior_logdet_ = 0;
};

double log_conditional_target(const ModelEval& model, const SubjectRecord& subject, double t_L,
                              int delta, const ParameterDraw& theta, const arma::vec& b);

struct MHResult {
  arma::mat draws;  // q x n_kept
  double acceptance_rate = 0;
  double final_scale = 0;
};

// adaptive random-walk sampler for [b | data up to t_L, event state, theta]
MHResult mh_sample_conditional(const ModelEval& model, const SubjectRecord& subject, double t_L,
                               int delta, const ParameterDraw& theta, const MHConfig& config,
                               RngStream& rng);

}  // namespace jmppc
