#include "jmppc/replicate.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "jmppc/csv.hpp"
#include "jmppc/parallel.hpp"
#include "jmppc/survival.hpp"

namespace jmppc {

namespace {

constexpr std::uint64_t kSaltChain = 0xC6A1;
constexpr std::uint64_t kSaltSim = 0x51B2;

// replicate m reuses posterior draw m mod n_draws, cycling for coverage
int draw_for(int m, std::size_t n_draws) { return static_cast<int>(m % n_draws); }

void check_inputs(const JointDataset& data, const ModelEval& model, const PosteriorDraws& draws,
                  int n_replicates, double horizon) {
  validate_dataset(data);
  validate_draws(draws, model);
  if (n_replicates < 1) throw std::runtime_error("n_replicates must be positive");
  if (!(horizon > 0)) throw std::runtime_error("model horizon must be positive");
}

ReplicatedData make_shell(Regime regime, const JointDataset& data, int n_replicates,
                          std::size_t n_draws, std::uint64_t seed) {
  ReplicatedData rep;
  rep.regime = regime;
  rep.seed = seed;
  rep.replicates.resize(n_replicates);
  for (int m = 0; m < n_replicates; ++m) {
    rep.replicates[m].draw_index = draw_for(m, n_draws);
    rep.replicates[m].subjects.resize(data.n());
  }
  return rep;
}

// responses at the given times plus an event time; rng order is fixed as
// event first, then one noise draw per response time
ReplicatedSubject simulate_subject(const ModelEval& model, const SubjectRecord& subject,
                                   const ParameterDraw& theta, const arma::vec& b, double t_start,
                                   double horizon, const std::vector<double>& times,
                                   bool truncate_at_event, RngStream& rng) {
  SubjectState state;
  state.model = &model;
  state.subject = &subject;
  state.theta = &theta;
  state.b = b;
  ReplicatedSubject out;
  out.id = subject.id;
  const EventSimResult ev = simulate_event_time(state, t_start, horizon, rng);
  out.event_time = ev.time;
  out.event_indicator = ev.event ? 1 : 0;
  for (double t : times) {
    if (truncate_at_event && !(t < out.event_time)) break;
    out.times.push_back(t);
    out.values.push_back(linear_predictor(state, t) + theta.sigma * rng.normal());
  }
  return out;
}

std::vector<double> times_after(const SubjectRecord& subject, double t_L) {
  std::vector<double> ts;
  for (double t : subject.times)
    if (t > t_L) ts.push_back(t);
  return ts;
}

// one conditional MH chain per (draw index, subject), yielding one b per
// replicate that uses that draw
arma::mat conditional_b_draws(const ModelEval& model, const SubjectRecord& subject, double t_L,
                              int delta, const ParameterDraw& theta, const MHConfig& mh,
                              int n_needed, std::uint64_t seed, std::uint64_t draw_index,
                              std::uint64_t subject_index) {
  MHConfig cfg = mh;
  cfg.n_iterations = cfg.burn_in + cfg.thinning * n_needed;
  RngStream rng = RngStream::derive(seed, kSaltChain, draw_index, subject_index);
  return mh_sample_conditional(model, subject, t_L, delta, theta, cfg, rng).draws;
}

}  // namespace

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::posterior_posterior: return "posterior_posterior";
    case Regime::posterior_prior: return "posterior_prior";
    case Regime::dynamic_landmark: return "dynamic";
    case Regime::cross_validated: return "cross_validated";
  }
  throw std::runtime_error("unknown regime");
}

Regime regime_from_name(const std::string& name) {
  if (name == "posterior_posterior") return Regime::posterior_posterior;
  if (name == "posterior_prior") return Regime::posterior_prior;
  if (name == "dynamic") return Regime::dynamic_landmark;
  if (name == "cross_validated") return Regime::cross_validated;
  throw std::runtime_error("unknown regime name: " + name);
}

ReplicatedData replicate_posterior_posterior(const JointDataset& data, const ModelSpec& spec,
                                             const PosteriorDraws& draws, int n_replicates,
                                             std::uint64_t seed, int threads) {
  const ModelEval model(spec);
  check_inputs(data, model, draws, n_replicates, spec.horizon);
  if (!draws.has_b())
    throw std::runtime_error(
        "posterior draws carry no per-subject random effects; use the posterior_prior or "
        "dynamic regimes, or re-sample them with the MH variant");
  const int n = static_cast<int>(data.n());
  std::vector<int> b_col(n);
  for (int i = 0; i < n; ++i) {
    const auto it = std::find(draws.b_subject_ids.begin(), draws.b_subject_ids.end(),
                              data.subjects[i].id);
    if (it == draws.b_subject_ids.end())
      throw std::runtime_error("stored random effects lack subject " + data.subjects[i].id);
    b_col[i] = static_cast<int>(it - draws.b_subject_ids.begin());
  }
  ReplicatedData rep = make_shell(Regime::posterior_posterior, data, n_replicates, draws.size(),
                                  seed);
  parallel_for(static_cast<std::size_t>(n_replicates) * n, threads, [&](std::size_t idx) {
    const int m = static_cast<int>(idx / n);
    const int i = static_cast<int>(idx % n);
    const int d = rep.replicates[m].draw_index;
    RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
    rep.replicates[m].subjects[i] =
        simulate_subject(model, data.subjects[i], draws.draws[d], draws.b[d].col(b_col[i]), 0.0,
                         spec.horizon, data.subjects[i].times, false, rng);
  });
  return rep;
}

ReplicatedData replicate_posterior_posterior_mh(const JointDataset& data, const ModelSpec& spec,
                                                const PosteriorDraws& draws, int n_replicates,
                                                const MHConfig& mh, std::uint64_t seed,
                                                int threads) {
  const ModelEval model(spec);
  check_inputs(data, model, draws, n_replicates, spec.horizon);
  const int n = static_cast<int>(data.n());
  const int n_used = static_cast<int>(std::min<std::size_t>(draws.size(), n_replicates));
  ReplicatedData rep = make_shell(Regime::posterior_posterior, data, n_replicates, draws.size(),
                                  seed);
  // members[d] lists the replicates generated from posterior draw d
  std::vector<std::vector<int>> members(n_used);
  for (int m = 0; m < n_replicates; ++m) members[draw_for(m, draws.size())].push_back(m);
  parallel_for(static_cast<std::size_t>(n_used) * n, threads, [&](std::size_t idx) {
    const int d = static_cast<int>(idx / n);
    const int i = static_cast<int>(idx % n);
    const SubjectRecord& subject = data.subjects[i];
    const arma::mat bs = conditional_b_draws(model, subject, subject.event_time,
                                             subject.event_indicator, draws.draws[d], mh,
                                             static_cast<int>(members[d].size()), seed, d, i);
    for (std::size_t k = 0; k < members[d].size(); ++k) {
      const int m = members[d][k];
      RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
      rep.replicates[m].subjects[i] = simulate_subject(
          model, subject, draws.draws[d], bs.col(k), 0.0, spec.horizon, subject.times, false, rng);
    }
  });
  return rep;
}

ReplicatedData replicate_posterior_prior(const JointDataset& data, const ModelSpec& spec,
                                         const PosteriorDraws& draws, int n_replicates,
                                         std::uint64_t seed, int threads) {
  const ModelEval model(spec);
  check_inputs(data, model, draws, n_replicates, spec.horizon);
  const int n = static_cast<int>(data.n());
  ReplicatedData rep = make_shell(Regime::posterior_prior, data, n_replicates, draws.size(), seed);
  parallel_for(static_cast<std::size_t>(n_replicates) * n, threads, [&](std::size_t idx) {
    const int m = static_cast<int>(idx / n);
    const int i = static_cast<int>(idx % n);
    const ParameterDraw& theta = draws.draws[rep.replicates[m].draw_index];
    RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
    const arma::vec b = sample_prior_random_effects(theta.D, rng);
    rep.replicates[m].subjects[i] = simulate_subject(model, data.subjects[i], theta, b, 0.0,
                                                     spec.horizon, data.subjects[i].times, true,
                                                     rng);
  });
  return rep;
}

ReplicatedData replicate_dynamic(const JointDataset& data, const ModelSpec& spec,
                                 const PosteriorDraws& draws, double t_L, int n_replicates,
                                 const MHConfig& mh, std::uint64_t seed, int threads) {
  const ModelEval model(spec);
  check_inputs(data, model, draws, n_replicates, spec.horizon);
  if (t_L < 0) throw std::runtime_error("landmark t_L must be nonnegative");
  if (!(t_L < spec.horizon)) throw std::runtime_error("landmark t_L must lie before the horizon");
  JointDataset risk;
  risk.covariate_names = data.covariate_names;
  for (const auto& s : data.subjects)
    if (s.event_time > t_L) risk.subjects.push_back(s);
  if (risk.subjects.empty()) throw std::runtime_error("no subjects at risk at the landmark");
  const int n = static_cast<int>(risk.n());
  const int n_used = static_cast<int>(std::min<std::size_t>(draws.size(), n_replicates));
  ReplicatedData rep = make_shell(Regime::dynamic_landmark, risk, n_replicates, draws.size(),
                                  seed);
  rep.landmark = t_L;
  std::vector<std::vector<int>> members(n_used);
  for (int m = 0; m < n_replicates; ++m) members[draw_for(m, draws.size())].push_back(m);
  parallel_for(static_cast<std::size_t>(n_used) * n, threads, [&](std::size_t idx) {
    const int d = static_cast<int>(idx / n);
    const int i = static_cast<int>(idx % n);
    const SubjectRecord& subject = risk.subjects[i];
    // still event-free at t_L: condition on survival only
    const arma::mat bs =
        conditional_b_draws(model, subject, t_L, 0, draws.draws[d], mh,
                            static_cast<int>(members[d].size()), seed, d, i);
    const std::vector<double> later = times_after(subject, t_L);
    for (std::size_t k = 0; k < members[d].size(); ++k) {
      const int m = members[d][k];
      RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
      rep.replicates[m].subjects[i] = simulate_subject(model, subject, draws.draws[d], bs.col(k),
                                                       t_L, spec.horizon, later, false, rng);
    }
  });
  return rep;
}

ReplicatedData replicate_cross_validated(const JointDataset& data, const ModelSpec& spec,
                                         const PriorConfig& priors, const McmcConfig& mcmc,
                                         const FoldAssignment& folds, CvStyle style,
                                         int n_replicates, const MHConfig& mh, std::uint64_t seed,
                                         int threads) {
  const ModelEval model(spec);
  validate_dataset(data);
  if (n_replicates < 1) throw std::runtime_error("n_replicates must be positive");
  if (folds.n_folds < 2) throw std::runtime_error("cross-validation needs at least 2 folds");
  const int n = static_cast<int>(data.n());
  std::vector<int> fold_of(n);
  for (int i = 0; i < n; ++i) {
    const auto it = folds.fold_of_subject.find(data.subjects[i].id);
    if (it == folds.fold_of_subject.end())
      throw std::runtime_error("fold assignment lacks subject " + data.subjects[i].id);
    fold_of[i] = it->second;
  }

  // fit once per fold complement; fits are independent, chains run serially
  std::vector<PosteriorDraws> fold_draws(folds.n_folds);
  parallel_for(folds.n_folds, threads, [&](std::size_t v_idx) {
    const int v = static_cast<int>(v_idx) + 1;
    JointDataset train;
    train.covariate_names = data.covariate_names;
    for (int i = 0; i < n; ++i)
      if (fold_of[i] != v) train.subjects.push_back(data.subjects[i]);
    McmcConfig cfg = mcmc;
    cfg.seed = splitmix64(mcmc.seed + 0x7D5ULL * v);
    try {
      fold_draws[v_idx] = fit_joint_model(train, spec, priors, cfg);
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(v) + ": " + e.what());
    }
  });
  for (const auto& fd : fold_draws)
    if (fd.size() == 0) throw std::runtime_error("fold fit produced no draws");

  ReplicatedData rep = make_shell(Regime::cross_validated, data, n_replicates,
                                  fold_draws[0].size(), seed);
  rep.cv_style = style;
  rep.n_folds = folds.n_folds;
  rep.generating_fold = folds.fold_of_subject;

  if (style == CvStyle::prior) {
    parallel_for(static_cast<std::size_t>(n_replicates) * n, threads, [&](std::size_t idx) {
      const int m = static_cast<int>(idx / n);
      const int i = static_cast<int>(idx % n);
      const PosteriorDraws& fd = fold_draws[fold_of[i] - 1];
      const ParameterDraw& theta = fd.draws[draw_for(m, fd.size())];
      RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
      const arma::vec b = sample_prior_random_effects(theta.D, rng);
      rep.replicates[m].subjects[i] = simulate_subject(model, data.subjects[i], theta, b, 0.0,
                                                       spec.horizon, data.subjects[i].times, true,
                                                       rng);
    });
    return rep;
  }

  // dynamic_at_observed_T: condition the random effects on the full observed
  // data, then replicate with the posterior-posterior kernel
  const int n_used =
      static_cast<int>(std::min<std::size_t>(fold_draws[0].size(), n_replicates));
  std::vector<std::vector<int>> members(n_used);
  for (int m = 0; m < n_replicates; ++m)
    members[draw_for(m, fold_draws[0].size())].push_back(m);
  parallel_for(static_cast<std::size_t>(n_used) * n, threads, [&](std::size_t idx) {
    const int d = static_cast<int>(idx / n);
    const int i = static_cast<int>(idx % n);
    const SubjectRecord& subject = data.subjects[i];
    const PosteriorDraws& fd = fold_draws[fold_of[i] - 1];
    const ParameterDraw& theta = fd.draws[d];
    const arma::mat bs =
        conditional_b_draws(model, subject, subject.event_time, subject.event_indicator, theta,
                            mh, static_cast<int>(members[d].size()), seed, d, i);
    for (std::size_t k = 0; k < members[d].size(); ++k) {
      const int m = members[d][k];
      RngStream rng = RngStream::derive(seed, kSaltSim, m, i);
      rep.replicates[m].subjects[i] = simulate_subject(
          model, subject, theta, bs.col(k), 0.0, spec.horizon, subject.times, false, rng);
    }
  });
  return rep;
}

void save_replicated_data(const ReplicatedData& rep, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["regime"] = regime_name(rep.regime);
  manifest["landmark"] = rep.landmark;
  manifest["seed"] = rep.seed;
  manifest["n_replicates"] = rep.replicates.size();
  std::vector<int> draw_indices;
  for (const auto& r : rep.replicates) draw_indices.push_back(r.draw_index);
  manifest["draw_indices"] = draw_indices;
  if (rep.regime == Regime::cross_validated) {
    manifest["cv_style"] =
        rep.cv_style == CvStyle::prior ? "prior" : "dynamic_at_observed_T";
    manifest["n_folds"] = rep.n_folds;
    manifest["generating_fold"] = rep.generating_fold;
  }
  std::ofstream mf(fs::path(directory) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw std::runtime_error("cannot write manifest in " + directory);

  for (std::size_t m = 0; m < rep.replicates.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "replicate_%04zu.csv", m);
    CsvTable table;
    table.header = {"id", "time", "value", "event_time", "event_indicator"};
    for (const auto& s : rep.replicates[m].subjects) {
      const std::string et = format_g17(s.event_time);
      const std::string ei = std::to_string(s.event_indicator);
      if (s.times.empty()) {
        table.rows.push_back({s.id, "", "", et, ei});
        continue;
      }
      for (std::size_t k = 0; k < s.times.size(); ++k)
        table.rows.push_back({s.id, format_g17(s.times[k]), format_g17(s.values[k]), et, ei});
    }
    write_csv((fs::path(directory) / name).string(), table.header, table.rows);
  }
}

ReplicatedData load_replicated_data(const std::string& directory) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(directory) / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + directory);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  ReplicatedData rep;
  rep.regime = regime_from_name(manifest.at("regime").get<std::string>());
  rep.landmark = manifest.at("landmark").get<double>();
  rep.seed = manifest.at("seed").get<std::uint64_t>();
  if (manifest.contains("cv_style")) {
    const std::string s = manifest["cv_style"].get<std::string>();
    rep.cv_style = s == "prior" ? CvStyle::prior : CvStyle::dynamic_at_observed_T;
    rep.n_folds = manifest.value("n_folds", 0);
    if (manifest.contains("generating_fold"))
      rep.generating_fold = manifest["generating_fold"].get<std::map<std::string, int>>();
  }
  const auto draw_indices = manifest.at("draw_indices").get<std::vector<int>>();
  const std::size_t M = manifest.at("n_replicates").get<std::size_t>();
  if (draw_indices.size() != M) throw std::runtime_error("manifest draw_indices length mismatch");
  rep.replicates.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "replicate_%04zu.csv", m);
    const CsvTable table = read_csv((fs::path(directory) / name).string());
    const int c_id = table.col("id"), c_t = table.col("time"), c_v = table.col("value");
    const int c_et = table.col("event_time"), c_ei = table.col("event_indicator");
    if (c_id < 0 || c_t < 0 || c_v < 0 || c_et < 0 || c_ei < 0)
      throw std::runtime_error(std::string(name) + ": missing replicate columns");
    Replicate& r = rep.replicates[m];
    r.draw_index = draw_indices[m];
    for (const auto& row : table.rows) {
      const std::string& id = row[c_id];
      if (r.subjects.empty() || r.subjects.back().id != id) {
        ReplicatedSubject s;
        s.id = id;
        s.event_time = parse_double(row[c_et], "event_time");
        s.event_indicator = static_cast<int>(parse_long(row[c_ei], "event_indicator"));
        r.subjects.push_back(std::move(s));
      }
      if (!row[c_t].empty()) {
        r.subjects.back().times.push_back(parse_double(row[c_t], "time"));
        r.subjects.back().values.push_back(parse_double(row[c_v], "value"));
      }
    }
  }
  return rep;
}

}  // namespace jmppc
