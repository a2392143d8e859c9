// jmppc: simulate joint longitudinal-survival data, fit the model, draw
// posterior-predictive replicates, and run goodness-of-fit checks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jmppc/check_runner.hpp"
#include "jmppc/csv.hpp"
#include "jmppc/data.hpp"
#include "jmppc/draws.hpp"
#include "jmppc/fitter.hpp"
#include "jmppc/gof.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/replicate.hpp"
#include "jmppc/scenario.hpp"
#include "jmppc/svg.hpp"

namespace fs = std::filesystem;
using jmppc::format_g17;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

struct RegimeChoice {
  jmppc::Regime regime = jmppc::Regime::posterior_posterior;
  double landmark = 0;
  int n_folds = 0;
};

// pp | prior | dynamic:t_L | cv:V (full regime names accepted too)
RegimeChoice parse_regime(const std::string& text) {
  std::string head = text;
  std::string arg;
  auto colon = text.find(':');
  if (colon != std::string::npos) {
    head = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  RegimeChoice out;
  if (head == "pp" || head == "posterior_posterior") {
    out.regime = jmppc::Regime::posterior_posterior;
  } else if (head == "prior" || head == "posterior_prior") {
    out.regime = jmppc::Regime::posterior_prior;
  } else if (head == "dynamic" || head == "dynamic_landmark") {
    out.regime = jmppc::Regime::dynamic_landmark;
  } else if (head == "cv" || head == "cross_validated") {
    out.regime = jmppc::Regime::cross_validated;
  } else {
    throw std::runtime_error("unknown regime: " + text +
                             " (expected pp, prior, dynamic:t_L, or cv:V)");
  }
  if (out.regime == jmppc::Regime::dynamic_landmark) {
    if (arg.empty()) throw std::runtime_error("dynamic regime needs a landmark, e.g. dynamic:1.0");
    out.landmark = jmppc::parse_double(arg, "landmark");
  } else if (out.regime == jmppc::Regime::cross_validated) {
    if (arg.empty()) throw std::runtime_error("cross_validated regime needs a fold count, e.g. cv:5");
    out.n_folds = static_cast<int>(jmppc::parse_long(arg, "fold count"));
  } else if (!arg.empty()) {
    throw std::runtime_error("regime " + head + " takes no argument");
  }
  return out;
}

int run_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  jmppc::ScenarioConfig config;
  if (!config_path.empty()) config = jmppc::ScenarioConfig::load(config_path);
  jmppc::JointDataset data = jmppc::generate_scenario_dataset(config, seed);

  ensure_dir(out_dir);
  jmppc::save_joint_dataset(data, join_path(out_dir, "longitudinal.csv"),
                            join_path(out_dir, "survival.csv"));

  std::size_t n_events = 0;
  for (const auto& s : data.subjects) n_events += s.event_indicator;
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["seed"] = seed;
  manifest["n_subjects"] = data.n();
  manifest["n_longitudinal_rows"] = data.total_measurements();
  manifest["n_events"] = n_events;
  manifest["config"] = nlohmann::json::parse(config.to_json());
  std::ofstream out(join_path(out_dir, "manifest.json"));
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write manifest.json");

  std::cout << "simulated " << data.n() << " subjects, " << data.total_measurements()
            << " measurements, " << n_events << " events -> " << out_dir << "\n";
  return 0;
}

int run_fit(const std::string& long_path, const std::string& surv_path,
            const std::string& spec_path, const std::string& model_name,
            const std::string& scenario_path, const jmppc::McmcConfig& mcmc,
            const std::string& out_dir) {
  jmppc::JointDataset data = jmppc::load_joint_dataset(long_path, surv_path);

  jmppc::ModelSpec spec;
  if (!spec_path.empty()) {
    if (!model_name.empty())
      throw std::runtime_error("--spec and --model are mutually exclusive");
    spec = jmppc::ModelSpec::load(spec_path);
  } else if (!model_name.empty()) {
    jmppc::ScenarioConfig config;
    if (!scenario_path.empty()) config = jmppc::ScenarioConfig::load(scenario_path);
    spec = jmppc::analysis_model_spec(jmppc::analysis_model_from_name(model_name), config, data);
  } else {
    throw std::runtime_error("fit needs either --spec or --model");
  }

  jmppc::PriorConfig priors;
  jmppc::FitDiagnostics diag;
  jmppc::JointDataset model_scale = jmppc::transform_outcome(data, spec.outcome_transform);
  jmppc::PosteriorDraws draws = jmppc::fit_joint_model(model_scale, spec, priors, mcmc, &diag);

  ensure_dir(out_dir);
  spec.save(join_path(out_dir, "model_spec.json"));
  jmppc::save_draws(draws, join_path(out_dir, "draws_theta.csv"),
                    join_path(out_dir, "draws_b.csv"));
  nlohmann::json dj;
  dj["schema_version"] = 1;
  dj["n_draws"] = draws.size();
  dj["seed"] = mcmc.seed;
  for (const auto& [block, rate] : diag.acceptance) dj["acceptance"][block] = rate;
  std::ofstream out(join_path(out_dir, "diagnostics.json"));
  out << dj.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write diagnostics.json");

  std::cout << "kept " << draws.size() << " posterior draws -> " << out_dir << "\n";
  return 0;
}

int run_check(const std::string& long_path, const std::string& surv_path,
              const std::string& spec_path, const std::string& theta_path,
              const std::string& b_path, const std::string& regime_text,
              std::vector<std::string> statistics, int n_replicates, std::uint64_t seed,
              int threads, const jmppc::GofOptions& base_options, const std::string& cv_style_name,
              const jmppc::McmcConfig& cv_mcmc, bool save_replicates, const std::string& out_dir) {
  jmppc::JointDataset data = jmppc::load_joint_dataset(long_path, surv_path);
  jmppc::ModelSpec spec = jmppc::ModelSpec::load(spec_path);
  jmppc::ModelEval model(spec);
  jmppc::JointDataset model_scale = jmppc::transform_outcome(data, spec.outcome_transform);

  RegimeChoice choice = parse_regime(regime_text);
  jmppc::MHConfig mh;
  jmppc::ReplicatedData reps;
  if (choice.regime == jmppc::Regime::cross_validated) {
    if (theta_path.empty() && spec_path.empty())
      throw std::runtime_error("cross_validated regime needs --spec");
    jmppc::PriorConfig priors;
    jmppc::FoldAssignment folds = jmppc::split_folds(data, choice.n_folds, seed);
    jmppc::CvStyle style;
    if (cv_style_name == "prior") {
      style = jmppc::CvStyle::prior;
    } else if (cv_style_name == "dynamic") {
      style = jmppc::CvStyle::dynamic_at_observed_T;
    } else {
      throw std::runtime_error("unknown --cv-style: " + cv_style_name +
                               " (expected prior or dynamic)");
    }
    reps = jmppc::replicate_cross_validated(model_scale, spec, priors, cv_mcmc, folds, style,
                                            n_replicates, mh, seed, threads);
  } else {
    if (theta_path.empty()) throw std::runtime_error("this regime needs --draws");
    jmppc::PosteriorDraws draws = jmppc::load_posterior_draws(model, theta_path, b_path);
    switch (choice.regime) {
      case jmppc::Regime::posterior_posterior:
        if (draws.has_b()) {
          reps = jmppc::replicate_posterior_posterior(model_scale, spec, draws, n_replicates,
                                                      seed, threads);
        } else {
          std::cerr << "note: draws carry no stored random effects; re-sampling them from "
                       "their conditional distribution\n";
          reps = jmppc::replicate_posterior_posterior_mh(model_scale, spec, draws, n_replicates,
                                                         mh, seed, threads);
        }
        break;
      case jmppc::Regime::posterior_prior:
        reps = jmppc::replicate_posterior_prior(model_scale, spec, draws, n_replicates, seed,
                                                threads);
        break;
      case jmppc::Regime::dynamic_landmark:
        reps = jmppc::replicate_dynamic(model_scale, spec, draws, choice.landmark, n_replicates,
                                        mh, seed, threads);
        break;
      default:
        throw std::runtime_error("unreachable regime");
    }
  }

  if (statistics.empty()) statistics = {"all"};
  if (statistics.size() == 1 && statistics[0] == "all") statistics = jmppc::all_statistics();

  jmppc::GofOptions options = base_options;
  options.threads = threads;
  std::vector<jmppc::CheckReport> reports = jmppc::run_checks(data, spec, reps, statistics, options);

  ensure_dir(out_dir);
  if (save_replicates) jmppc::save_replicated_data(reps, join_path(out_dir, "replicates"));

  std::vector<std::vector<std::string>> summary_rows;
  for (const auto& report : reports) {
    const std::string stem = "check_" + report.statistic;
    jmppc::save_check_report(report, join_path(out_dir, stem + ".json"),
                             join_path(out_dir, stem + ".csv"));
    jmppc::write_check_svg(report, join_path(out_dir, stem + ".svg"));
    const bool has_band = !report.band_lower.empty() && !report.replicates.empty();
    summary_rows.push_back({report.statistic, report.regime, format_g17(report.landmark),
                            std::to_string(report.replicates.size()), format_g17(report.mise),
                            has_band ? format_g17(jmppc::band_coverage(report)) : ""});
    std::cout << report.statistic << ": mise " << format_g17(report.mise) << "\n";
  }
  jmppc::write_csv(join_path(out_dir, "mise_summary.csv"),
                   {"statistic", "regime", "landmark", "n_replicates", "mise", "band_coverage"},
                   summary_rows);
  return 0;
}

int run_report(const std::vector<std::string>& check_dirs, std::vector<std::string> labels,
               const std::string& out_dir) {
  if (check_dirs.size() < 2) throw std::runtime_error("report needs at least two --check-dir");
  if (labels.empty()) {
    for (const auto& dir : check_dirs) {
      std::string name = fs::path(dir).filename().string();
      if (name.empty()) name = fs::path(dir).parent_path().filename().string();
      labels.push_back(name.empty() ? dir : name);
    }
  } else if (labels.size() != check_dirs.size()) {
    throw std::runtime_error("--label count must match --check-dir count");
  }

  // statistic -> per-model MISE, discovered from the summary tables
  std::vector<std::map<std::string, double>> mise_by_model(check_dirs.size());
  for (std::size_t m = 0; m < check_dirs.size(); ++m) {
    jmppc::CsvTable table = jmppc::read_csv(join_path(check_dirs[m], "mise_summary.csv"));
    int stat_col = table.col("statistic");
    int mise_col = table.col("mise");
    if (stat_col < 0 || mise_col < 0)
      throw std::runtime_error(check_dirs[m] + "/mise_summary.csv lacks statistic/mise columns");
    for (const auto& row : table.rows)
      mise_by_model[m][row[stat_col]] = jmppc::parse_double(row[mise_col], "mise");
  }
  for (std::size_t m = 1; m < mise_by_model.size(); ++m) {
    if (mise_by_model[m].size() != mise_by_model[0].size())
      throw std::runtime_error("check directories cover different statistics");
    for (const auto& [stat, value] : mise_by_model[m]) {
      (void)value;
      if (!mise_by_model[0].count(stat))
        throw std::runtime_error("check directories cover different statistics: " + stat);
    }
  }

  std::vector<std::string> header = {"statistic"};
  for (const auto& label : labels) header.push_back("mise_" + label);
  for (const auto& label : labels) header.push_back("rank_" + label);

  std::vector<std::vector<std::string>> rows;
  for (const auto& [stat, first_mise] : mise_by_model[0]) {
    (void)first_mise;
    std::vector<double> values;
    for (const auto& per_model : mise_by_model) values.push_back(per_model.at(stat));
    std::vector<std::string> row = {stat};
    for (double v : values) row.push_back(format_g17(v));
    for (double v : values) {
      int rank = 1;  // ties share the smaller rank
      for (double other : values) rank += other < v;
      row.push_back(std::to_string(rank));
    }
    rows.push_back(row);
  }

  ensure_dir(out_dir);
  jmppc::write_csv(join_path(out_dir, "mise_table.csv"), header, rows);

  std::cout << "statistic";
  for (const auto& label : labels) std::cout << "  " << label << "(rank)";
  std::cout << "\n";
  for (const auto& row : rows) {
    std::cout << row[0];
    for (std::size_t m = 0; m < labels.size(); ++m)
      std::cout << "  " << row[1 + m] << "(" << row[1 + labels.size() + m] << ")";
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posterior-predictive goodness-of-fit checks for joint models"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dataset from the simulation design");
  std::string sim_config, sim_out = "sim_out";
  std::uint64_t sim_seed = 1;
  sim->add_option("--config", sim_config, "scenario config JSON (defaults when omitted)");
  sim->add_option("--seed", sim_seed, "rng seed");
  sim->add_option("--out", sim_out, "output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the joint model by MCMC");
  std::string fit_long, fit_surv, fit_spec, fit_model, fit_scenario, fit_out = "fit_out";
  jmppc::McmcConfig fit_mcmc;
  fit->add_option("--long", fit_long, "longitudinal CSV (id,time,value)")->required();
  fit->add_option("--surv", fit_surv, "survival CSV (id,event_time,event_indicator,...)")->required();
  fit->add_option("--spec", fit_spec, "model spec JSON");
  fit->add_option("--model", fit_model,
                  "analysis model: true_model, linear_trend, exp_outcome, slope_form");
  fit->add_option("--scenario", fit_scenario, "scenario config JSON for --model knot settings");
  fit->add_option("--iterations", fit_mcmc.n_iterations, "MCMC iterations");
  fit->add_option("--burnin", fit_mcmc.burn_in, "burn-in iterations");
  fit->add_option("--thin", fit_mcmc.thinning, "thinning interval");
  fit->add_option("--seed", fit_mcmc.seed, "rng seed");
  fit->add_option("--out", fit_out, "output directory");

  // check
  auto* check = app.add_subcommand("check", "replicate data and run goodness-of-fit checks");
  std::string chk_long, chk_surv, chk_spec, chk_theta, chk_b, chk_regime = "pp";
  std::string chk_cv_style = "prior", chk_out = "check_out";
  std::vector<std::string> chk_stats;
  int chk_m = 50, chk_threads = 0;
  std::uint64_t chk_seed = 1;
  bool chk_save_reps = false;
  jmppc::GofOptions chk_options;
  jmppc::McmcConfig chk_cv_mcmc;
  check->add_option("--long", chk_long, "longitudinal CSV")->required();
  check->add_option("--surv", chk_surv, "survival CSV")->required();
  check->add_option("--spec", chk_spec, "model spec JSON")->required();
  check->add_option("--draws", chk_theta, "posterior parameter draws CSV");
  check->add_option("--draws-b", chk_b, "per-subject random-effect draws CSV");
  check->add_option("--regime", chk_regime, "pp | prior | dynamic:t_L | cv:V");
  check->add_option("--stat", chk_stats,
                    "statistic to run (repeatable): ecdf_longitudinal, mean, variance, "
                    "semivariogram, ecdf_survival, pit, concordance, all");
  check->add_option("--M", chk_m, "replicated datasets per check");
  check->add_option("--seed", chk_seed, "rng seed");
  check->add_option("--threads", chk_threads, "worker cap (0 = hardware)");
  check->add_option("--kappa", chk_options.kappa, "concordance marker age cutoff");
  check->add_option("--span", chk_options.loess.span, "loess span");
  check->add_option("--max-lag", chk_options.max_lag, "semivariogram lag cap (0 = all pairs)");
  check->add_option("--cv-style", chk_cv_style, "held-out kernel: prior | dynamic");
  check->add_option("--iterations", chk_cv_mcmc.n_iterations, "MCMC iterations per fold fit");
  check->add_option("--burnin", chk_cv_mcmc.burn_in, "burn-in per fold fit");
  check->add_option("--thin", chk_cv_mcmc.thinning, "thinning per fold fit");
  check->add_flag("--save-replicates", chk_save_reps, "persist the replicated datasets");
  check->add_option("--out", chk_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "compare MISE across fitted models");
  std::vector<std::string> rep_dirs, rep_labels;
  std::string rep_out = "report_out";
  report->add_option("--check-dir", rep_dirs, "check output directory (repeatable)")->required();
  report->add_option("--label", rep_labels, "model label per directory (defaults to basename)");
  report->add_option("--out", rep_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(sim_config, sim_seed, sim_out);
    if (fit->parsed())
      return run_fit(fit_long, fit_surv, fit_spec, fit_model, fit_scenario, fit_mcmc, fit_out);
    if (check->parsed()) {
      chk_cv_mcmc.seed = chk_seed;
      return run_check(chk_long, chk_surv, chk_spec, chk_theta, chk_b, chk_regime, chk_stats,
                       chk_m, chk_seed, chk_threads, chk_options, chk_cv_style, chk_cv_mcmc,
                       chk_save_reps, chk_out);
    }
    if (report->parsed()) return run_report(rep_dirs, rep_labels, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
