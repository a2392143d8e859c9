#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <armadillo>

#include "jmppc/data.hpp"
#include "jmppc/draws.hpp"
#include "jmppc/model_spec.hpp"

namespace jmppc {

// Simulation design: nonlinear subject-specific trajectories over a natural
// cubic spline of time, a Weibull baseline hazard, a binary treatment acting
// on the hazard, the current trajectory value as the association input, and
// administrative censoring.
struct ScenarioConfig {
  int n_subjects = 300;
  arma::vec beta = {1.75, 0.033, -5.84, -0.182};
  double sigma = 0.126;
  arma::mat D = {{1.3343607, 0.1754659, 0.2719901, 0.2825738},
                 {0.1754659, 0.09889257, 0.0508637, -0.01836841},
                 {0.2719901, 0.0508637, 1.56264217, 0.05125092},
                 {0.2825738, -0.01836841, 0.05125092, 0.10579131}};
  std::vector<double> internal_knots = {5.0, 10.0};
  double boundary_lo = 0.0;
  double boundary_hi = 25.0;
  int n_random_visits = 14;  // besides the baseline visit at time zero
  double weibull_shape = 6.325;
  double gamma0 = -20.0;
  double gamma_treat = -0.85;
  double alpha = 0.145;
  double treat_probability = 0.5;
  double censor_time = 25.0;

  std::string to_json() const;
  static ScenarioConfig from_json(const std::string& text);
  void save(const std::string& path) const;
  static ScenarioConfig load(const std::string& path);
};

JointDataset generate_scenario_dataset(const ScenarioConfig& config, std::uint64_t seed);

// the generating model and its parameters as a single degenerate draw
ModelSpec dgp_model_spec(const ScenarioConfig& config);
PosteriorDraws dgp_parameters(const ScenarioConfig& config);

enum class AnalysisModelKind { true_model, linear_trend, exp_outcome, slope_form };

std::string analysis_model_name(AnalysisModelKind kind);
AnalysisModelKind analysis_model_from_name(const std::string& name);

// Model to fit with the MCMC sampler: the baseline hazard becomes a cubic
// B-spline with interior knots at event-time quantiles of the given dataset.
ModelSpec analysis_model_spec(AnalysisModelKind kind, const ScenarioConfig& config,
                              const JointDataset& data);

// Oracle mode sidesteps fitting: each analysis model keeps the generating
// Weibull baseline and gets pseudo-true parameters. Misspecified trajectories
// are least-squares projections of the generating process onto the model's
// design; the association coefficient is the regression projection of the
// generating hazard input onto the model's input, and the hazard intercept is
// re-solved to reproduce the dataset's event fraction.
ModelSpec oracle_model_spec(AnalysisModelKind kind, const ScenarioConfig& config);
PosteriorDraws oracle_parameters(AnalysisModelKind kind, const ScenarioConfig& config,
                                 const JointDataset& data, std::uint64_t seed);

}  // namespace jmppc
