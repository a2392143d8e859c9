#include "jmppc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "jmppc/ranef.hpp"
#include "jmppc/rng.hpp"
#include "jmppc/splines.hpp"
#include "jmppc/stats.hpp"
#include "jmppc/survival.hpp"

namespace jmppc {

namespace {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw std::runtime_error("unknown field in " + where + ": " + item.key());
  }
}

void validate_config(const ScenarioConfig& c) {
  if (c.n_subjects < 1) throw std::runtime_error("n_subjects must be positive");
  if (!(c.sigma > 0)) throw std::runtime_error("sigma must be positive");
  const arma::uword p = c.beta.n_elem;
  if (c.D.n_rows != p || c.D.n_cols != p)
    throw std::runtime_error("D must be square with one row per coefficient");
  arma::mat L;
  if (!arma::chol(L, arma::symmatu(c.D), "lower"))
    throw std::runtime_error("D is not positive definite");
  if (c.beta.n_elem != c.internal_knots.size() + 2)
    throw std::runtime_error("beta length must equal the spline basis size plus the intercept");
  if (!(c.boundary_lo < c.boundary_hi)) throw std::runtime_error("invalid boundary knots");
  if (c.n_random_visits < 0) throw std::runtime_error("n_random_visits must be nonnegative");
  if (!(c.weibull_shape > 0)) throw std::runtime_error("weibull_shape must be positive");
  if (!(c.censor_time > 0)) throw std::runtime_error("censor_time must be positive");
  if (c.treat_probability < 0 || c.treat_probability > 1)
    throw std::runtime_error("treat_probability must lie in [0,1]");
}

}  // namespace

std::string ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["n_subjects"] = n_subjects;
  j["beta"] = arma::conv_to<std::vector<double>>::from(beta);
  j["sigma"] = sigma;
  std::vector<std::vector<double>> d;
  for (arma::uword r = 0; r < D.n_rows; ++r)
    d.push_back(arma::conv_to<std::vector<double>>::from(D.row(r)));
  j["D"] = d;
  j["internal_knots"] = internal_knots;
  j["boundary"] = {boundary_lo, boundary_hi};
  j["n_random_visits"] = n_random_visits;
  j["weibull_shape"] = weibull_shape;
  j["gamma0"] = gamma0;
  j["gamma_treat"] = gamma_treat;
  j["alpha"] = alpha;
  j["treat_probability"] = treat_probability;
  j["censor_time"] = censor_time;
  return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  check_keys(j, {"schema_version", "n_subjects", "beta", "sigma", "D", "internal_knots",
                 "boundary", "n_random_visits", "weibull_shape", "gamma0", "gamma_treat",
                 "alpha", "treat_probability", "censor_time"},
             "scenario config");
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("unsupported scenario config schema_version");
  ScenarioConfig c;
  c.n_subjects = j.value("n_subjects", c.n_subjects);
  if (j.contains("beta")) c.beta = arma::vec(j["beta"].get<std::vector<double>>());
  c.sigma = j.value("sigma", c.sigma);
  if (j.contains("D")) {
    const auto rows = j["D"].get<std::vector<std::vector<double>>>();
    c.D.set_size(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != c.D.n_cols) throw std::runtime_error("ragged rows in D");
      for (std::size_t k = 0; k < rows[r].size(); ++k) c.D(r, k) = rows[r][k];
    }
  }
  if (j.contains("internal_knots"))
    c.internal_knots = j["internal_knots"].get<std::vector<double>>();
  if (j.contains("boundary")) {
    const auto b = j["boundary"].get<std::vector<double>>();
    if (b.size() != 2) throw std::runtime_error("boundary must hold exactly 2 knots");
    c.boundary_lo = b[0];
    c.boundary_hi = b[1];
  }
  c.n_random_visits = j.value("n_random_visits", c.n_random_visits);
  c.weibull_shape = j.value("weibull_shape", c.weibull_shape);
  c.gamma0 = j.value("gamma0", c.gamma0);
  c.gamma_treat = j.value("gamma_treat", c.gamma_treat);
  c.alpha = j.value("alpha", c.alpha);
  c.treat_probability = j.value("treat_probability", c.treat_probability);
  c.censor_time = j.value("censor_time", c.censor_time);
  validate_config(c);
  return c;
}

void ScenarioConfig::save(const std::string& path) const {
  std::ofstream out(path);
  out << to_json() << "\n";
  if (!out) throw std::runtime_error("cannot write " + path);
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

ModelSpec dgp_model_spec(const ScenarioConfig& config) {
  ModelSpec s;
  s.fixed_design.intercept = true;
  s.fixed_design.time_basis.kind = TimeBasisKind::natural_spline;
  s.fixed_design.time_basis.internal_knots = config.internal_knots;
  s.fixed_design.time_basis.boundary_lo = config.boundary_lo;
  s.fixed_design.time_basis.boundary_hi = config.boundary_hi;
  s.random_design = s.fixed_design;
  s.functional_form.kind = FunctionalFormKind::value;
  s.baseline_hazard.kind = BaselineHazardSpec::Kind::weibull;
  s.baseline_hazard.weibull_shape = config.weibull_shape;
  s.survival_design.intercept = true;
  s.survival_design.covariates = {"treat"};
  s.outcome_transform = OutcomeTransform::identity;
  s.horizon = config.censor_time;
  return s;
}

PosteriorDraws dgp_parameters(const ScenarioConfig& config) {
  validate_config(config);
  ParameterDraw d;
  d.beta = config.beta;
  d.sigma = config.sigma;
  d.gamma = {config.gamma0, config.gamma_treat};
  d.alpha = config.alpha;
  d.D = arma::symmatu(config.D);
  d.tau = 0;
  PosteriorDraws out;
  out.draws.push_back(std::move(d));
  return out;
}

JointDataset generate_scenario_dataset(const ScenarioConfig& config, std::uint64_t seed) {
  validate_config(config);
  const ModelSpec spec = dgp_model_spec(config);
  const ModelEval model(spec);
  const ParameterDraw theta = dgp_parameters(config).draws.front();

  JointDataset data;
  data.covariate_names = {"treat"};
  data.subjects.resize(config.n_subjects);
  for (int i = 0; i < config.n_subjects; ++i) {
    RngStream rng = RngStream::derive(seed, 0x5CE0, i);
    SubjectRecord& rec = data.subjects[i];
    char id[16];
    std::snprintf(id, sizeof(id), "s%04d", i + 1);
    rec.id = id;
    rec.covariates["treat"] = rng.bernoulli(config.treat_probability) ? 1.0 : 0.0;
    const arma::vec b = sample_prior_random_effects(theta.D, rng);
    std::vector<double> visits{config.boundary_lo};
    for (int v = 0; v < config.n_random_visits; ++v)
      visits.push_back(config.boundary_lo +
                       rng.uniform() * (config.censor_time - config.boundary_lo));
    std::sort(visits.begin(), visits.end());
    visits.erase(std::unique(visits.begin(), visits.end()), visits.end());

    SubjectState state;
    state.model = &model;
    state.subject = &rec;
    state.theta = &theta;
    state.b = b;
    const EventSimResult ev = simulate_event_time(state, 0.0, config.censor_time, rng);
    rec.event_time = ev.time;
    rec.event_indicator = ev.event ? 1 : 0;
    for (double t : visits) {
      if (!(t < rec.event_time)) continue;
      rec.times.push_back(t);
      rec.values.push_back(linear_predictor(state, t) + theta.sigma * rng.normal());
    }
  }
  validate_dataset(data);
  return data;
}

std::string analysis_model_name(AnalysisModelKind kind) {
  switch (kind) {
    case AnalysisModelKind::true_model: return "true_model";
    case AnalysisModelKind::linear_trend: return "linear_trend";
    case AnalysisModelKind::exp_outcome: return "exp_outcome";
    case AnalysisModelKind::slope_form: return "slope_form";
  }
  throw std::runtime_error("unknown analysis model kind");
}

AnalysisModelKind analysis_model_from_name(const std::string& name) {
  if (name == "true_model") return AnalysisModelKind::true_model;
  if (name == "linear_trend") return AnalysisModelKind::linear_trend;
  if (name == "exp_outcome") return AnalysisModelKind::exp_outcome;
  if (name == "slope_form") return AnalysisModelKind::slope_form;
  throw std::runtime_error("unknown analysis model name: " + name);
}

namespace {

void apply_misspecification(ModelSpec& s, AnalysisModelKind kind) {
  switch (kind) {
    case AnalysisModelKind::true_model:
      break;
    case AnalysisModelKind::linear_trend:
      s.fixed_design.time_basis = TimeBasisSpec{TimeBasisKind::linear, {}, 0, 0};
      s.random_design = s.fixed_design;
      break;
    case AnalysisModelKind::exp_outcome:
      s.outcome_transform = OutcomeTransform::exp_value;
      break;
    case AnalysisModelKind::slope_form:
      s.functional_form.kind = FunctionalFormKind::slope;
      break;
  }
}

}  // namespace

ModelSpec analysis_model_spec(AnalysisModelKind kind, const ScenarioConfig& config,
                              const JointDataset& data) {
  ModelSpec s = dgp_model_spec(config);
  apply_misspecification(s, kind);

  std::vector<double> event_times;
  for (const auto& subj : data.subjects)
    if (subj.event_indicator == 1) event_times.push_back(subj.event_time);
  if (event_times.empty())
    for (const auto& subj : data.subjects) event_times.push_back(subj.event_time);
  const double hi = data.max_event_time();
  std::vector<double> knots = quantile_interior_knots(event_times, 9, 3);
  const double margin = 1e-6 * hi;
  for (double& k : knots) k = std::clamp(k, margin, hi - margin);
  std::sort(knots.begin(), knots.end());
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i] <= knots[i - 1]) knots[i] = knots[i - 1] + margin;

  s.baseline_hazard.kind = BaselineHazardSpec::Kind::bspline;
  s.baseline_hazard.degree = 3;
  s.baseline_hazard.interior_knots = knots;
  s.baseline_hazard.boundary_lo = 0;
  s.baseline_hazard.boundary_hi = hi;
  s.baseline_hazard.transform = TimeTransform::identity;
  // the spline carries its own level
  s.survival_design.intercept = false;
  s.horizon = hi;
  return s;
}

ModelSpec oracle_model_spec(AnalysisModelKind kind, const ScenarioConfig& config) {
  ModelSpec s = dgp_model_spec(config);
  apply_misspecification(s, kind);
  return s;
}

namespace {

arma::vec time_grid(const ScenarioConfig& config, int n_points) {
  arma::vec g(n_points);
  for (int k = 0; k < n_points; ++k)
    g(k) = config.boundary_lo + (config.censor_time - config.boundary_lo) *
                                    static_cast<double>(k) / static_cast<double>(n_points - 1);
  return g;
}

arma::mat design_on_grid(const DesignEval& design, const arma::vec& grid, int deriv) {
  SubjectRecord dummy;
  arma::mat out(grid.n_elem, design.dim());
  arma::vec row;
  for (arma::uword k = 0; k < grid.n_elem; ++k) {
    design.row(grid(k), dummy, deriv, row);
    out.row(k) = row.t();
  }
  return out;
}

// solve for the hazard intercept reproducing the target event fraction; the
// intercept scales the cumulative hazard by exp(gamma0)
double calibrate_gamma0(const ModelSpec& spec, const ParameterDraw& base, double target,
                        double treat_probability, double censor_time, std::uint64_t seed) {
  const ModelEval model(spec);
  const int n_mc = 1000;
  ParameterDraw theta = base;
  theta.gamma(0) = 0;
  std::vector<double> base_cumhaz(n_mc);
  for (int s = 0; s < n_mc; ++s) {
    RngStream rng = RngStream::derive(seed, 0xCA1B, s);
    SubjectRecord rec;
    rec.id = "mc";
    rec.covariates["treat"] = rng.bernoulli(treat_probability) ? 1.0 : 0.0;
    rec.event_time = censor_time;
    SubjectState state;
    state.model = &model;
    state.subject = &rec;
    state.theta = &theta;
    state.b = sample_prior_random_effects(base.D, rng);
    base_cumhaz[s] = cumulative_hazard(state, 0.0, censor_time);
  }
  auto frac = [&](double g0) {
    double total = 0;
    for (double h : base_cumhaz) total += -std::expm1(-std::exp(g0) * h);
    return total / static_cast<double>(n_mc);
  };
  double lo = -80, hi = 40;
  if (frac(lo) > target || frac(hi) < target)
    throw std::runtime_error("event-fraction calibration target out of reach");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (frac(mid) < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-10) break;
  }
  return 0.5 * (lo + hi);
}

double observed_event_fraction(const JointDataset& data) {
  double events = 0;
  for (const auto& s : data.subjects) events += s.event_indicator;
  return events / static_cast<double>(data.n());
}

struct PooledSpread {
  double sd_true = 0, sd_model = 0, corr = 0;
};

// spread of the association inputs under the generating process vs under the
// candidate model, pooled over random effects draws and grid times
PooledSpread association_spread(const arma::mat& true_vals, const arma::mat& model_vals) {
  std::vector<double> a, b;
  a.reserve(true_vals.n_elem);
  b.reserve(model_vals.n_elem);
  for (arma::uword i = 0; i < true_vals.n_elem; ++i) {
    a.push_back(true_vals(i));
    b.push_back(model_vals(i));
  }
  PooledSpread sp;
  sp.sd_true = sd_of(a);
  sp.sd_model = sd_of(b);
  sp.corr = pearson_corr(a, b);
  return sp;
}

}  // namespace

PosteriorDraws oracle_parameters(AnalysisModelKind kind, const ScenarioConfig& config,
                                 const JointDataset& data, std::uint64_t seed) {
  validate_config(config);
  if (kind == AnalysisModelKind::true_model) return dgp_parameters(config);

  const ModelSpec true_spec = dgp_model_spec(config);
  const ModelSpec model_spec = oracle_model_spec(kind, config);
  const DesignEval true_design(true_spec.fixed_design);
  const arma::vec grid = time_grid(config, 201);
  const arma::mat Phi = design_on_grid(true_design, grid, 0);

  const int n_mc = 2000;
  arma::mat b_draws(config.beta.n_elem, n_mc);
  for (int s = 0; s < n_mc; ++s) {
    RngStream rng = RngStream::derive(seed, 0x0B5E, s);
    b_draws.col(s) = sample_prior_random_effects(config.D, rng);
  }

  ParameterDraw d;
  d.sigma = config.sigma;
  d.gamma = {config.gamma0, config.gamma_treat};
  d.alpha = config.alpha;
  d.tau = 0;

  // association input samples: the generating current value against the
  // candidate model's input, on the same (draw, time) pairs
  arma::mat true_assoc(grid.n_elem, n_mc);
  for (int s = 0; s < n_mc; ++s) true_assoc.col(s) = Phi * (config.beta + b_draws.col(s));
  arma::mat model_assoc;

  if (kind == AnalysisModelKind::linear_trend) {
    arma::mat L(grid.n_elem, 2);
    L.col(0).ones();
    L.col(1) = grid;
    const arma::mat A = arma::solve(L.t() * L, L.t() * Phi);  // 2 x p projection
    d.beta = A * config.beta;
    d.D = arma::symmatu(A * config.D * A.t());
    const arma::mat M = Phi - L * A;  // projection residual design
    const arma::vec rf = M * config.beta;
    const arma::vec vb = arma::sum((M * config.D) % M, 1);
    d.sigma = std::sqrt(config.sigma * config.sigma + arma::mean(rf % rf + vb));
    model_assoc.set_size(grid.n_elem, n_mc);
    for (int s = 0; s < n_mc; ++s)
      model_assoc.col(s) = L * (d.beta + A * b_draws.col(s));
  } else if (kind == AnalysisModelKind::exp_outcome) {
    // least-squares projection of the transformed-scale trajectories
    const arma::mat PtP = Phi.t() * Phi;
    arma::mat coef(config.beta.n_elem, n_mc);
    double resid_ss = 0, noise_ss = 0;
    const double s2 = config.sigma * config.sigma;
    for (int s = 0; s < n_mc; ++s) {
      const arma::vec eta = true_assoc.col(s);
      const arma::vec g = arma::exp(eta + 0.5 * s2);
      coef.col(s) = arma::solve(PtP, Phi.t() * g);
      const arma::vec r = g - Phi * coef.col(s);
      resid_ss += arma::mean(r % r);
      noise_ss += arma::mean(arma::exp(2.0 * eta + s2) * std::expm1(s2));
    }
    d.beta = arma::mean(coef, 1);
    d.D = arma::symmatu(arma::cov(coef.t()));
    d.sigma = std::sqrt((resid_ss + noise_ss) / static_cast<double>(n_mc));
    model_assoc.set_size(grid.n_elem, n_mc);
    for (int s = 0; s < n_mc; ++s) model_assoc.col(s) = Phi * coef.col(s);
  } else {  // slope_form
    d.beta = config.beta;
    d.D = arma::symmatu(config.D);
    const arma::mat Phi1 = design_on_grid(true_design, grid, 1);
    model_assoc.set_size(grid.n_elem, n_mc);
    for (int s = 0; s < n_mc; ++s)
      model_assoc.col(s) = Phi1 * (config.beta + b_draws.col(s));
  }

  const PooledSpread sp = association_spread(true_assoc, model_assoc);
  // regression projection of the generating association input onto the
  // candidate model's input: the coefficient a fitted model would estimate,
  // not a scale match, so weak correlation shrinks the association
  d.alpha = config.alpha * sp.corr * sp.sd_true / sp.sd_model;

  const double target = observed_event_fraction(data);
  d.gamma(0) = calibrate_gamma0(model_spec, d, target, config.treat_probability,
                                config.censor_time, seed);

  PosteriorDraws out;
  out.draws.push_back(std::move(d));
  return out;
}

}  // namespace jmppc
