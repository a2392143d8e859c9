#pragma once

#include "jmppc/draws.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/quadrature.hpp"
#include "jmppc/rng.hpp"

namespace jmppc {

// Everything needed to evaluate one subject's trajectory and hazard under one
// parameter draw. Non-owning; the referenced objects must outlive the state.
struct SubjectState {
  const ModelEval* model = nullptr;
  const SubjectRecord* subject = nullptr;
  const ParameterDraw* theta = nullptr;
  arma::vec b;
  const QuadratureRule* quad = &QuadratureRule::legendre15();
};

double linear_predictor(const SubjectState& s, double t, int deriv = 0);

// association input f(t) under the model's functional form
double functional_form_value(const SubjectState& s, double t);

double log_hazard(const SubjectState& s, double t);
double hazard(const SubjectState& s, double t);

// integral of the hazard over [t0, t1]
double cumulative_hazard(const SubjectState& s, double t0, double t1);

// P(T <= t | T > t_L) = 1 - exp(-H(t_L, t))
double conditional_event_cdf(const SubjectState& s, double t_L, double t);

// Design rows (ax, az) with f(t) = ax.beta + az.b under the model's
// functional form; every supported form is linear in (beta, b).
void assoc_design_row(const ModelEval& model, const SubjectRecord& subject, double t,
                      const QuadratureRule& quad, arma::vec& ax, arma::vec& az);

struct EventSimResult {
  double time = 0;
  bool event = false;  // false: censored at the horizon
};

// solves H(t_L, T) = target for T; censored at horizon when total mass is short
EventSimResult solve_event_time(const SubjectState& s, double t_L, double horizon,
                                double target_cumhaz);
EventSimResult simulate_event_time(const SubjectState& s, double t_L, double horizon,
                                   RngStream& rng);

}  // namespace jmppc
