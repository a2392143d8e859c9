#include "jmppc/check_runner.hpp"

#include <stdexcept>

namespace jmppc {

const std::vector<std::string>& all_statistics() {
  static const std::vector<std::string> stats = {
      "ecdf_longitudinal", "mean",         "variance", "semivariogram",
      "ecdf_survival",     "pit",          "concordance"};
  return stats;
}

namespace {

JointDataset prepare_observed(const JointDataset& observed, const ModelSpec& spec,
                              const ReplicatedData& reps) {
  JointDataset out;
  out.covariate_names = observed.covariate_names;
  const bool dynamic = reps.regime == Regime::dynamic_landmark;
  for (const auto& s : observed.subjects) {
    if (dynamic && !(s.event_time > reps.landmark)) continue;
    SubjectRecord r = s;
    if (dynamic) {
      r.times.clear();
      r.values.clear();
      for (std::size_t k = 0; k < s.times.size(); ++k)
        if (s.times[k] > reps.landmark) {
          r.times.push_back(s.times[k]);
          r.values.push_back(s.values[k]);
        }
    }
    for (double& v : r.values) v = apply_outcome_transform(spec.outcome_transform, v);
    out.subjects.push_back(std::move(r));
  }
  if (out.subjects.empty()) throw std::runtime_error("no observed subjects match the replicates");
  return out;
}

}  // namespace

CheckReport run_check(const JointDataset& observed, const ModelSpec& spec,
                      const ReplicatedData& reps, const std::string& statistic,
                      const GofOptions& options) {
  const JointDataset prepared = prepare_observed(observed, spec, reps);
  if (statistic == "ecdf_longitudinal") return longitudinal_ecdf_check(prepared, reps, options);
  if (statistic == "mean") return mean_function_check(prepared, reps, options);
  if (statistic == "variance") return variance_function_check(prepared, reps, options);
  if (statistic == "semivariogram") return semivariogram_check(prepared, reps, options);
  if (statistic == "ecdf_survival") return survival_ecdf_check(prepared, reps, options);
  if (statistic == "pit") return pit_check(prepared, reps, options);
  if (statistic == "concordance") return concordance_check(prepared, reps, options);
  throw std::runtime_error("unknown statistic: " + statistic);
}

std::vector<CheckReport> run_checks(const JointDataset& observed, const ModelSpec& spec,
                                    const ReplicatedData& reps,
                                    const std::vector<std::string>& statistics,
                                    const GofOptions& options) {
  std::vector<CheckReport> reports;
  for (const auto& stat : statistics)
    reports.push_back(run_check(observed, spec, reps, stat, options));
  return reports;
}

}  // namespace jmppc
