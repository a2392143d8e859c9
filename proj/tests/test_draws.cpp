#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include <armadillo>

#include "jmppc/draws.hpp"
#include "jmppc/model_spec.hpp"

#include "test_util.hpp"

using namespace jmppc;

namespace {

ModelSpec small_spec() {
  ModelSpec spec;
  spec.fixed_design.intercept = true;
  spec.fixed_design.time_basis.kind = TimeBasisKind::linear;
  spec.random_design.intercept = true;
  spec.random_design.time_basis.kind = TimeBasisKind::linear;
  spec.baseline_hazard.kind = BaselineHazardSpec::Kind::bspline;
  spec.baseline_hazard.degree = 2;
  spec.baseline_hazard.interior_knots = {5.0};
  spec.baseline_hazard.boundary_lo = 0.0;
  spec.baseline_hazard.boundary_hi = 20.0;
  spec.survival_design.intercept = false;
  spec.survival_design.covariates = {"treat"};
  spec.horizon = 20.0;
  return spec;
}

PosteriorDraws awkward_draws(const ModelEval& model, int n, bool with_b) {
  arma::arma_rng::set_seed(9);
  PosteriorDraws out;
  for (int k = 0; k < n; ++k) {
    ParameterDraw d;
    d.beta = arma::vec{1.0 / 3.0 + k, -2.0 / 7.0};
    d.sigma = 0.1 + 0.01 * k;
    d.gamma = arma::vec{-0.85 / (k + 1)};
    d.alpha = 0.145 * std::sqrt(2.0) * (k + 1);
    d.gamma_h0 = arma::vec(model.n_gh0(), arma::fill::randn);
    arma::mat L(2, 2, arma::fill::zeros);
    L(0, 0) = 1.1;
    L(1, 0) = 0.3 + 0.1 * k;
    L(1, 1) = 0.4;
    d.D = L * L.t();
    d.tau = 2.5 + k;
    out.draws.push_back(d);
  }
  if (with_b) {
    out.b_subject_ids = {"s1", "s2", "s3"};
    for (int k = 0; k < n; ++k) out.b.push_back(arma::mat(2, 3, arma::fill::randn));
  }
  return out;
}

bool draws_equal(const PosteriorDraws& a, const PosteriorDraws& b) {
  if (a.size() != b.size() || a.b.size() != b.b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const ParameterDraw &x = a.draws[k], &y = b.draws[k];
    if (!arma::approx_equal(x.beta, y.beta, "absdiff", 0.0)) return false;
    if (x.sigma != y.sigma || x.alpha != y.alpha || x.tau != y.tau) return false;
    if (!arma::approx_equal(x.gamma, y.gamma, "absdiff", 0.0)) return false;
    if (!arma::approx_equal(x.gamma_h0, y.gamma_h0, "absdiff", 0.0)) return false;
    if (!arma::approx_equal(x.D, y.D, "absdiff", 0.0)) return false;
  }
  for (std::size_t k = 0; k < a.b.size(); ++k)
    if (!arma::approx_equal(a.b[k], b.b[k], "absdiff", 0.0)) return false;
  return a.b_subject_ids == b.b_subject_ids;
}

}  // namespace

TEST_CASE("posterior draws survive a CSV round trip exactly") {
  const ModelEval model(small_spec());
  const std::string theta_path = "test_draws_theta.csv";
  const std::string b_path = "test_draws_b.csv";

  SUBCASE("with stored random effects") {
    const PosteriorDraws d = awkward_draws(model, 4, true);
    save_draws(d, theta_path, b_path);
    const PosteriorDraws back = load_posterior_draws(model, theta_path, b_path);
    CHECK(back.has_b());
    CHECK(draws_equal(d, back));
  }
  SUBCASE("theta only") {
    const PosteriorDraws d = awkward_draws(model, 3, false);
    save_draws(d, theta_path);
    const PosteriorDraws back = load_posterior_draws(model, theta_path);
    CHECK_FALSE(back.has_b());
    CHECK(draws_equal(d, back));
  }
  std::remove(theta_path.c_str());
  std::remove(b_path.c_str());
}

TEST_CASE("draw validation pins down the offending draw and field") {
  const ModelEval model(small_spec());
  PosteriorDraws good = awkward_draws(model, 3, true);
  validate_draws(good, model);  // must not throw

  auto corrupt = [&](auto&& fn, const std::string& fragment) {
    PosteriorDraws bad = good;
    fn(bad);
    expect_throw_contains([&] { validate_draws(bad, model); }, fragment);
  };

  corrupt([](PosteriorDraws& d) { d.draws.clear(); d.b.clear(); }, "no posterior draws");
  corrupt([](PosteriorDraws& d) { d.draws[1].beta = arma::vec{1.0}; },
          "draw 2: beta length mismatch");
  corrupt([](PosteriorDraws& d) { d.draws[0].gamma.reset(); }, "gamma length mismatch");
  corrupt([](PosteriorDraws& d) { d.draws[2].gamma_h0 = arma::vec(1); },
          "draw 3: gh0 length mismatch");
  corrupt([](PosteriorDraws& d) { d.draws[0].sigma = 0.0; }, "sigma must be positive");
  corrupt([](PosteriorDraws& d) { d.draws[1].tau = -1.0; }, "tau must be positive");
  corrupt([](PosteriorDraws& d) { d.draws[0].D = arma::mat(3, 3, arma::fill::eye); },
          "D dimension mismatch");
  corrupt([](PosteriorDraws& d) { d.draws[0].D(0, 1) += 0.5; }, "D not symmetric");
  corrupt([](PosteriorDraws& d) {
    d.draws[0].D = arma::mat{{1.0, 2.0}, {2.0, 1.0}};
  }, "D not positive definite");
  corrupt([](PosteriorDraws& d) { d.b.pop_back(); },
          "random-effect draws not aligned");
}

TEST_CASE("loading rejects files with missing columns") {
  const ModelEval model(small_spec());
  const std::string theta_path = "test_draws_bad.csv";
  {
    const PosteriorDraws d = awkward_draws(model, 2, false);
    save_draws(d, theta_path);
  }
  // strip the alpha column by rewriting the header only
  std::string text;
  {
    FILE* f = std::fopen(theta_path.c_str(), "rb");
    REQUIRE(f);
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
  }
  const auto pos = text.find("alpha.1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "alpha_x");
  {
    FILE* f = std::fopen(theta_path.c_str(), "wb");
    REQUIRE(f);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  expect_throw_contains([&] { load_posterior_draws(model, theta_path); },
                        "missing column alpha.1");
  std::remove(theta_path.c_str());
}
