#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "jmppc/data.hpp"
#include "jmppc/draws.hpp"
#include "jmppc/model_spec.hpp"

namespace jmppc {

struct PriorConfig {
  double beta_scale = 10.0;
  double gamma_scale = 10.0;
  double alpha_scale = 10.0;
  double gh0_null_scale = 100.0;  // normal prior on the penalty null space
  double sigma2_shape = 0.1;
  double sigma2_rate = 0.1;
  double iw_extra_df = 2.0;  // D ~ inverse-Wishart(q + extra, I)
  double tau_shape = 5.0;
  double tau_rate = 0.05;
  bool tau_rate_parameterization = true;  // false reads tau_rate as a scale
  int penalty_order = 2;
};

struct McmcConfig {
  int n_iterations = 6000;
  int burn_in = 2000;
  int thinning = 4;
  std::uint64_t seed = 1;
  bool survival_block = true;  // false: longitudinal submodel only
  int quadrature_order = 15;
};

struct FitDiagnostics {
  std::map<std::string, double> acceptance;  // per MH block
};

// Metropolis-within-Gibbs sampler for the joint model. Conjugate updates for
// sigma^2, D, and tau; adaptive random-walk blocks for beta, the per-subject
// random effects, (gamma, alpha), and the log baseline-hazard coefficients.
PosteriorDraws fit_joint_model(const JointDataset& data, const ModelSpec& spec,
                               const PriorConfig& priors, const McmcConfig& config,
                               FitDiagnostics* diagnostics = nullptr);

}  // namespace jmppc
