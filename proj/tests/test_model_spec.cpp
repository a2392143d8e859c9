#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "jmppc/model_spec.hpp"

#include "test_util.hpp"

using namespace jmppc;

namespace {

ModelSpec full_spec() {
  ModelSpec spec;
  spec.fixed_design.intercept = true;
  spec.fixed_design.time_basis.kind = TimeBasisKind::natural_spline;
  spec.fixed_design.time_basis.internal_knots = {5.0, 10.0};
  spec.fixed_design.time_basis.boundary_lo = 0.0;
  spec.fixed_design.time_basis.boundary_hi = 25.0;
  spec.fixed_design.covariates = {"treat"};
  spec.random_design.intercept = true;
  spec.random_design.time_basis.kind = TimeBasisKind::natural_spline;
  spec.random_design.time_basis.internal_knots = {5.0, 10.0};
  spec.random_design.time_basis.boundary_lo = 0.0;
  spec.random_design.time_basis.boundary_hi = 25.0;
  spec.functional_form.kind = FunctionalFormKind::windowed_average;
  spec.functional_form.window = 2.5;
  spec.baseline_hazard.kind = BaselineHazardSpec::Kind::bspline;
  spec.baseline_hazard.degree = 3;
  spec.baseline_hazard.interior_knots = {2.0, 4.0, 8.0, 12.0, 18.0};
  spec.baseline_hazard.boundary_lo = 0.0;
  spec.baseline_hazard.boundary_hi = 25.0;
  spec.baseline_hazard.transform = TimeTransform::log_time;
  spec.survival_design.intercept = false;
  spec.survival_design.covariates = {"treat"};
  spec.outcome_transform = OutcomeTransform::exp_value;
  spec.horizon = 25.0;
  return spec;
}

}  // namespace

TEST_CASE("model spec survives a JSON round trip byte for byte") {
  const ModelSpec a = full_spec();
  const std::string text = a.to_json();
  const ModelSpec b = ModelSpec::from_json(text);
  CHECK(b.to_json() == text);
  CHECK(b.functional_form.window == 2.5);
  CHECK(b.baseline_hazard.transform == TimeTransform::log_time);
  CHECK(b.outcome_transform == OutcomeTransform::exp_value);

  ModelSpec w = full_spec();
  w.baseline_hazard = BaselineHazardSpec{};
  w.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
  w.baseline_hazard.weibull_shape = 6.325;
  w.functional_form = FunctionalForm{};
  const std::string wt = w.to_json();
  const ModelSpec w2 = ModelSpec::from_json(wt);
  CHECK(w2.to_json() == wt);
  CHECK(w2.baseline_hazard.weibull_shape == 6.325);

  const std::string path = "test_model_spec_tmp.json";
  a.save(path);
  CHECK(ModelSpec::load(path).to_json() == text);
  std::remove(path.c_str());
}

TEST_CASE("unknown JSON fields are rejected by name") {
  const std::string text = full_spec().to_json();

  auto inject = [&](const std::string& pointer, const std::string& key) {
    nlohmann::json j = nlohmann::json::parse(text);
    j[nlohmann::json::json_pointer(pointer)][key] = 1;
    return j.dump();
  };

  expect_throw_contains([&] { ModelSpec::from_json(inject("", "extra")); },
                        "unknown field 'extra' in model spec");
  expect_throw_contains([&] { ModelSpec::from_json(inject("/fixed_design", "bogus")); },
                        "unknown field 'bogus' in fixed_design");
  expect_throw_contains([&] { ModelSpec::from_json(inject("/random_design/time_basis", "df")); },
                        "unknown field 'df' in random_design.time_basis");
  expect_throw_contains([&] { ModelSpec::from_json(inject("/baseline_hazard", "scale")); },
                        "unknown field 'scale' in baseline_hazard");
}

TEST_CASE("malformed specs fail with precise messages") {
  const std::string text = full_spec().to_json();
  auto mutate = [&](auto&& fn) {
    nlohmann::json j = nlohmann::json::parse(text);
    fn(j);
    return j.dump();
  };

  expect_throw_contains([&] { ModelSpec::from_json("{not json"); }, "JSON parse error");
  expect_throw_contains([&] {
    ModelSpec::from_json(mutate([](nlohmann::json& j) { j["schema_version"] = 2; }));
  }, "unsupported schema_version");
  expect_throw_contains([&] {
    ModelSpec::from_json(mutate([](nlohmann::json& j) { j["baseline_hazard"]["kind"] = "cox"; }));
  }, "invalid baseline_hazard kind: cox");
  expect_throw_contains([&] {
    ModelSpec::from_json(mutate([](nlohmann::json& j) { j["outcome_transform"] = "sqrt"; }));
  }, "invalid outcome_transform: sqrt");
  expect_throw_contains([&] {
    ModelSpec::from_json(mutate([](nlohmann::json& j) {
      j["fixed_design"]["time_basis"]["kind"] = "fourier";
    }));
  }, "invalid time_basis kind: fourier");
}

TEST_CASE("compiled model exposes the right dimensions") {
  const ModelSpec spec = full_spec();
  const ModelEval model(spec);
  // intercept + 3 natural-spline columns + treat
  CHECK(model.p() == 5);
  CHECK(model.q() == 4);
  CHECK(model.n_gamma() == 1);
  // degree 3 with 5 interior knots
  CHECK(model.n_gh0() == 9);

  SubjectRecord s;
  s.id = "a";
  s.covariates["treat"] = 1.0;
  s.event_time = 10.0;
  const arma::vec w = model.survival_covariate_row(s);
  REQUIRE(w.n_elem == 1);
  CHECK(w[0] == 1.0);

  ModelSpec wspec = spec;
  wspec.baseline_hazard = BaselineHazardSpec{};
  wspec.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
  wspec.baseline_hazard.weibull_shape = 2.0;
  wspec.survival_design.intercept = true;
  const ModelEval wmodel(wspec);
  CHECK(wmodel.n_gh0() == 0);
  CHECK(wmodel.n_gamma() == 2);
  // log h0(t) = log(shape) + (shape - 1) log t
  CHECK(wmodel.log_h0_weibull(3.0) == doctest::Approx(std::log(2.0) + std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("compiled model rejects inconsistent specs") {
  expect_throw_contains([] {
    ModelSpec s = full_spec();
    s.random_design.covariates = {"treat"};
    ModelEval m(s);
  }, "random design must not contain baseline covariates");
  expect_throw_contains([] {
    ModelSpec s = full_spec();
    s.baseline_hazard = BaselineHazardSpec{};
    s.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
    s.baseline_hazard.weibull_shape = 0.0;
    ModelEval m(s);
  }, "weibull shape must be positive");
  expect_throw_contains([] {
    ModelSpec s = full_spec();
    s.functional_form.window = 0.0;
    ModelEval m(s);
  }, "windowed functional form needs a positive window");
}

TEST_CASE("outcome transforms move responses onto the model scale") {
  CHECK(apply_outcome_transform(OutcomeTransform::identity, 1.7) == 1.7);
  CHECK(apply_outcome_transform(OutcomeTransform::exp_value, 1.0) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));

  JointDataset data;
  SubjectRecord s;
  s.id = "a";
  s.times = {0.0, 1.0};
  s.values = {0.5, 1.5};
  s.event_time = 2.0;
  s.event_indicator = 1;
  data.subjects.push_back(s);
  const JointDataset out = transform_outcome(data, OutcomeTransform::exp_value);
  CHECK(out.subjects[0].values[0] == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(out.subjects[0].values[1] == doctest::Approx(std::exp(1.5)).epsilon(1e-15));
  // identity leaves the data untouched
  const JointDataset same = transform_outcome(data, OutcomeTransform::identity);
  CHECK(same.subjects[0].values[1] == 1.5);
}
