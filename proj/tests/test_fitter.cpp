#include <doctest.h>

#include <cmath>

#include <armadillo>

#include "jmppc/fitter.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/rng.hpp"
#include "jmppc/scenario.hpp"

#include "test_util.hpp"

using namespace jmppc;

namespace {

ModelSpec lmm_spec() {
  ModelSpec spec;
  spec.fixed_design.intercept = true;
  spec.fixed_design.time_basis.kind = TimeBasisKind::linear;
  spec.random_design.intercept = true;
  spec.random_design.time_basis.kind = TimeBasisKind::linear;
  spec.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
  spec.baseline_hazard.weibull_shape = 1.0;
  spec.survival_design.intercept = true;
  spec.horizon = 10.0;
  return spec;
}

// balanced random-intercept/slope data with known variance components
JointDataset simulate_lmm(const arma::vec& beta, const arma::mat& D, double sigma,
                          int n_subjects, std::uint64_t seed) {
  RngStream rng(seed);
  const arma::mat L = arma::chol(D, "lower");
  JointDataset data;
  for (int i = 0; i < n_subjects; ++i) {
    SubjectRecord s;
    s.id = "s" + std::to_string(i + 1);
    arma::vec b = L * arma::vec{rng.normal(), rng.normal()};
    for (int j = 0; j < 8; ++j) {
      const double t = j;
      s.times.push_back(t);
      s.values.push_back(beta[0] + b[0] + (beta[1] + b[1]) * t + sigma * rng.normal());
    }
    s.event_time = 8.0;
    s.event_indicator = 0;
    data.subjects.push_back(s);
  }
  return data;
}

}  // namespace

TEST_CASE("longitudinal-only fit matches the mixed-model oracle within 3 posterior sds") {
  const arma::vec beta_true = {2.0, -0.5};
  const arma::mat D_true = {{0.8, 0.1}, {0.1, 0.2}};
  const double sigma_true = 0.3;
  const JointDataset data = simulate_lmm(beta_true, D_true, sigma_true, 60, 424242);
  const ModelSpec spec = lmm_spec();

  // GLS oracle at the generating variance components:
  // beta_hat = (sum X' V^-1 X)^-1 sum X' V^-1 y, V = Z D Z' + sigma^2 I
  arma::mat xtvx(2, 2, arma::fill::zeros);
  arma::vec xtvy(2, arma::fill::zeros);
  for (const auto& s : data.subjects) {
    const int n = static_cast<int>(s.times.size());
    arma::mat X(n, 2);
    arma::vec y(n);
    for (int j = 0; j < n; ++j) {
      X(j, 0) = 1.0;
      X(j, 1) = s.times[j];
      y[j] = s.values[j];
    }
    const arma::mat V = X * D_true * X.t() +
                        sigma_true * sigma_true * arma::eye(n, n);  // Z == X here
    const arma::mat Vi = arma::inv_sympd(V);
    xtvx += X.t() * Vi * X;
    xtvy += X.t() * Vi * y;
  }
  const arma::vec beta_gls = arma::solve(xtvx, xtvy);

  McmcConfig config;
  config.n_iterations = 4000;
  config.burn_in = 1000;
  config.thinning = 3;
  config.seed = 7;
  config.survival_block = false;
  const PosteriorDraws draws = fit_joint_model(data, spec, PriorConfig{}, config);
  REQUIRE(draws.size() == 1000);
  REQUIRE(draws.has_b());

  arma::mat betas(draws.size(), 2);
  arma::vec sigmas(draws.size());
  arma::mat dvals(draws.size(), 2);
  for (std::size_t k = 0; k < draws.size(); ++k) {
    betas.row(k) = draws.draws[k].beta.t();
    sigmas[k] = draws.draws[k].sigma;
    dvals(k, 0) = draws.draws[k].D(0, 0);
    dvals(k, 1) = draws.draws[k].D(1, 1);
  }
  for (int j = 0; j < 2; ++j) {
    const double mean = arma::mean(betas.col(j));
    const double sd = arma::stddev(betas.col(j));
    INFO("beta[", j, "] mean ", mean, " gls ", beta_gls[j], " sd ", sd);
    CHECK(std::abs(mean - beta_gls[j]) < 3.0 * sd);
  }
  // variance components recovered loosely (60 subjects)
  CHECK(std::abs(arma::mean(sigmas) - sigma_true) / sigma_true < 0.10);
  CHECK(std::abs(arma::mean(dvals.col(0)) - D_true(0, 0)) / D_true(0, 0) < 0.5);
  CHECK(std::abs(arma::mean(dvals.col(1)) - D_true(1, 1)) / D_true(1, 1) < 0.5);
}

TEST_CASE("joint fit produces valid, reproducible draws with live acceptance rates") {
  ScenarioConfig config;
  config.n_subjects = 40;
  const JointDataset data = generate_scenario_dataset(config, 31);
  const ModelSpec spec = analysis_model_spec(AnalysisModelKind::true_model, config, data);
  const ModelEval model(spec);

  McmcConfig mcmc;
  mcmc.n_iterations = 400;
  mcmc.burn_in = 200;
  mcmc.thinning = 2;
  mcmc.seed = 99;
  FitDiagnostics diag;
  const PosteriorDraws draws = fit_joint_model(data, spec, PriorConfig{}, mcmc, &diag);
  REQUIRE(draws.size() == 100);
  validate_draws(draws, model);
  for (const auto& [block, rate] : diag.acceptance) {
    INFO("block ", block, " acceptance ", rate);
    CHECK(rate > 0.02);
    CHECK(rate < 0.98);
  }
  REQUIRE(draws.has_b());
  CHECK(draws.b_subject_ids.size() == data.subjects.size());

  const PosteriorDraws again = fit_joint_model(data, spec, PriorConfig{}, mcmc);
  REQUIRE(again.size() == draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    CHECK(arma::approx_equal(draws.draws[k].beta, again.draws[k].beta, "absdiff", 0.0));
    CHECK(draws.draws[k].alpha == again.draws[k].alpha);
  }
}

TEST_CASE("fitter rejects broken configurations and unidentifiable designs") {
  const JointDataset data = simulate_lmm({1.0, 0.2}, arma::mat{{0.5, 0.0}, {0.0, 0.1}}, 0.2, 8, 5);
  const ModelSpec spec = lmm_spec();

  expect_throw_contains([&] {
    McmcConfig bad;
    bad.n_iterations = 100;
    bad.burn_in = 100;
    fit_joint_model(data, spec, PriorConfig{}, bad);
  }, "burn-in exceeds iterations");

  expect_throw_contains([&] {
    JointDataset collinear = data;
    for (auto& s : collinear.subjects) {
      s.covariates["dup1"] = 1.0;  // identical copy of the intercept
      s.covariates["dup2"] = 1.0;
    }
    ModelSpec bad = spec;
    bad.fixed_design.covariates = {"dup1", "dup2"};
    McmcConfig small;
    small.n_iterations = 50;
    small.burn_in = 10;
    small.survival_block = false;
    fit_joint_model(collinear, bad, PriorConfig{}, small);
  }, "collinear fixed design: not identifiable");
}
