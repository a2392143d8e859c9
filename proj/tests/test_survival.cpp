#include <doctest.h>

#include <cmath>

#include <armadillo>

#include "jmppc/model_spec.hpp"
#include "jmppc/rng.hpp"
#include "jmppc/survival.hpp"

using namespace jmppc;

namespace {

// intercept-only trajectory over a weibull baseline: the hazard is
// h(t) = shape * t^(shape-1) * exp(gamma0 + alpha * (beta0 + b0))
ModelSpec const_weibull_spec(double shape) {
  ModelSpec spec;
  spec.fixed_design.intercept = true;
  spec.fixed_design.time_basis.kind = TimeBasisKind::none;
  spec.random_design.intercept = true;
  spec.random_design.time_basis.kind = TimeBasisKind::none;
  spec.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
  spec.baseline_hazard.weibull_shape = shape;
  spec.survival_design.intercept = true;
  spec.horizon = 50.0;
  return spec;
}

SubjectRecord basic_subject() {
  SubjectRecord s;
  s.id = "s1";
  s.times = {0.0};
  s.values = {0.0};
  s.event_time = 10.0;
  s.event_indicator = 1;
  return s;
}

ParameterDraw const_theta(double beta0, double gamma0, double alpha) {
  ParameterDraw theta;
  theta.beta = {beta0};
  theta.sigma = 0.1;
  theta.gamma = {gamma0};
  theta.alpha = alpha;
  theta.D = arma::mat(1, 1, arma::fill::eye);
  return theta;
}

}  // namespace

TEST_CASE("weibull cumulative hazard matches the closed form within 1e-8") {
  const double shape = 6.325;
  const ModelSpec spec = const_weibull_spec(shape);
  const ModelEval model(spec);
  const SubjectRecord subject = basic_subject();
  // gamma0 + alpha * eta = -0.6 + 0.5 * 1.2 = 0, so H(t0, t1) = t1^shape - t0^shape
  const ParameterDraw theta = const_theta(1.0, -0.6, 0.5);
  SubjectState s{&model, &subject, &theta, arma::vec{0.2}, &QuadratureRule::legendre15()};

  CHECK(std::abs(cumulative_hazard(s, 0.0, 1.0) - 1.0) < 1e-8);
  for (auto [t0, t1] : {std::pair{0.0, 2.0}, {0.5, 1.5}, {1.0, 3.0}}) {
    const double want = std::pow(t1, shape) - std::pow(t0, shape);
    CHECK(std::abs(cumulative_hazard(s, t0, t1) - want) < 1e-8 * std::max(1.0, want));
  }
  CHECK(std::abs(hazard(s, 1.0) - shape) < 1e-10);
  CHECK(std::abs(log_hazard(s, 1.0) - std::log(shape)) < 1e-12);
}

TEST_CASE("constant-coefficient b-spline baseline reduces to an exponential hazard") {
  ModelSpec spec = const_weibull_spec(1.0);
  spec.baseline_hazard.kind = BaselineHazardSpec::Kind::bspline;
  spec.baseline_hazard.degree = 3;
  spec.baseline_hazard.interior_knots = {2.0, 5.0};
  spec.baseline_hazard.boundary_lo = 0.0;
  spec.baseline_hazard.boundary_hi = 10.0;
  spec.survival_design.intercept = false;  // the spline carries the level
  const ModelEval model(spec);
  const SubjectRecord subject = basic_subject();
  ParameterDraw theta = const_theta(1.0, 0.0, 0.5);
  theta.gamma.reset();
  const double c = -0.3;
  theta.gamma_h0 = arma::vec(model.n_gh0(), arma::fill::value(c));
  SubjectState s{&model, &subject, &theta, arma::vec{0.2}, &QuadratureRule::legendre15()};

  // log h(t) = c + alpha * 1.2 everywhere, by partition of unity
  const double rate = std::exp(c + 0.5 * 1.2);
  CHECK(std::abs(hazard(s, 3.7) - rate) < 1e-10);
  CHECK(std::abs(cumulative_hazard(s, 1.0, 6.0) - 5.0 * rate) < 1e-8);
}

TEST_CASE("event-time solver leaves a root residual below 1e-6") {
  ModelSpec spec = const_weibull_spec(2.0);
  spec.fixed_design.time_basis.kind = TimeBasisKind::natural_spline;
  spec.fixed_design.time_basis.internal_knots = {5.0, 10.0};
  spec.fixed_design.time_basis.boundary_lo = 0.0;
  spec.fixed_design.time_basis.boundary_hi = 25.0;
  spec.horizon = 25.0;
  const ModelEval model(spec);
  const SubjectRecord subject = basic_subject();
  ParameterDraw theta;
  theta.beta = {1.0, 0.4, -1.2, 0.3};
  theta.sigma = 0.1;
  theta.gamma = {-3.5};
  theta.alpha = 0.4;
  theta.D = arma::mat(1, 1, arma::fill::eye);
  SubjectState s{&model, &subject, &theta, arma::vec{0.1}, &QuadratureRule::legendre15()};

  for (double target : {0.05, 0.5, 2.0}) {
    const EventSimResult r = solve_event_time(s, 0.0, 25.0, target);
    REQUIRE(r.event);
    CHECK(std::abs(cumulative_hazard(s, 0.0, r.time) - target) <= 1e-6);
  }
  for (double t_L : {1.0, 8.0}) {
    const EventSimResult r = solve_event_time(s, t_L, 25.0, 0.3);
    REQUIRE(r.event);
    CHECK(r.time > t_L);
    CHECK(std::abs(cumulative_hazard(s, t_L, r.time) - 0.3) <= 1e-6);
  }
  // more mass than the window holds: censored at the horizon
  const EventSimResult cens =
      solve_event_time(s, 0.0, 25.0, cumulative_hazard(s, 0.0, 25.0) + 1.0);
  CHECK_FALSE(cens.event);
  CHECK(cens.time == 25.0);
}

TEST_CASE("conditional event cdf matches the weibull closed form") {
  const double shape = 3.0;
  const ModelSpec spec = const_weibull_spec(shape);
  const ModelEval model(spec);
  const SubjectRecord subject = basic_subject();
  const ParameterDraw theta = const_theta(1.0, -0.6, 0.5);
  SubjectState s{&model, &subject, &theta, arma::vec{0.2}, &QuadratureRule::legendre15()};
  for (auto [tL, t] : {std::pair{0.0, 1.0}, {0.5, 1.2}, {1.0, 1.0}}) {
    const double want = 1.0 - std::exp(-(std::pow(t, shape) - std::pow(tL, shape)));
    CHECK(std::abs(conditional_event_cdf(s, tL, t) - want) < 1e-9);
  }
}

TEST_CASE("functional forms reduce to closed forms for a linear trajectory") {
  ModelSpec spec = const_weibull_spec(1.0);
  spec.fixed_design.time_basis.kind = TimeBasisKind::linear;
  spec.horizon = 25.0;
  SubjectRecord subject = basic_subject();
  ParameterDraw theta = const_theta(0.0, 0.0, 0.0);
  theta.beta = {2.0, 0.75};  // eta(t) = 2 + 0.75 t + b0

  auto eval_form = [&](FunctionalFormKind kind, double window, double t) {
    ModelSpec s2 = spec;
    s2.functional_form.kind = kind;
    s2.functional_form.window = window;
    const ModelEval m2(s2);
    SubjectState st{&m2, &subject, &theta, arma::vec{0.5}, &QuadratureRule::legendre15()};
    return functional_form_value(st, t);
  };

  const double t = 6.0;
  CHECK(eval_form(FunctionalFormKind::value, 0, t) == doctest::Approx(2.5 + 0.75 * t).epsilon(1e-12));
  CHECK(eval_form(FunctionalFormKind::slope, 0, t) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::abs(eval_form(FunctionalFormKind::acceleration, 0, t)) < 1e-12);
  // mean over (t-2, t) of a linear function: value at t - slope * w/2
  CHECK(eval_form(FunctionalFormKind::windowed_average, 2.0, t) ==
        doctest::Approx(2.5 + 0.75 * t - 0.75).epsilon(1e-10));
  // mean over (0, t): value at t/2
  CHECK(eval_form(FunctionalFormKind::integral_average, 0, t) ==
        doctest::Approx(2.5 + 0.75 * t / 2).epsilon(1e-10));
}

TEST_CASE("linear predictor derivatives match finite differences") {
  ModelSpec spec = const_weibull_spec(1.0);
  spec.fixed_design.time_basis.kind = TimeBasisKind::natural_spline;
  spec.fixed_design.time_basis.internal_knots = {4.0};
  spec.fixed_design.time_basis.boundary_lo = 0.0;
  spec.fixed_design.time_basis.boundary_hi = 10.0;
  const ModelEval model(spec);
  SubjectRecord subject = basic_subject();
  ParameterDraw theta = const_theta(0.0, 0.0, 0.0);
  theta.beta = {1.0, -0.8, 0.3};
  SubjectState s{&model, &subject, &theta, arma::vec{0.4}, &QuadratureRule::legendre15()};
  const double h = 1e-5;
  for (double t : {0.5, 3.0, 7.7}) {
    const double fd = (linear_predictor(s, t + h) - linear_predictor(s, t - h)) / (2 * h);
    CHECK(std::abs(linear_predictor(s, t, 1) - fd) < 1e-6);
  }
}

TEST_CASE("simulated event times are deterministic and calibrated") {
  const double shape = 2.0;
  const ModelSpec spec = const_weibull_spec(shape);
  const ModelEval model(spec);
  const SubjectRecord subject = basic_subject();
  const ParameterDraw theta = const_theta(1.0, -0.6, 0.5);  // H(0,t) = t^2
  SubjectState s{&model, &subject, &theta, arma::vec{0.2}, &QuadratureRule::legendre15()};

  RngStream r1(99), r2(99);
  const EventSimResult a = simulate_event_time(s, 0.0, 50.0, r1);
  const EventSimResult b = simulate_event_time(s, 0.0, 50.0, r2);
  CHECK(a.time == b.time);
  CHECK(a.event == b.event);

  // F(T) = 1 - exp(-T^2) should be uniform; check its mean to 3 standard errors
  RngStream rng(7);
  const int n = 2000;
  double sum = 0;
  int events = 0;
  for (int i = 0; i < n; ++i) {
    const EventSimResult r = simulate_event_time(s, 0.0, 50.0, rng);
    if (!r.event) continue;
    ++events;
    sum += 1.0 - std::exp(-r.time * r.time);
  }
  REQUIRE(events == n);  // horizon far beyond any plausible draw
  const double mean_u = sum / n;
  CHECK(std::abs(mean_u - 0.5) < 3.0 / std::sqrt(12.0 * n));
}
