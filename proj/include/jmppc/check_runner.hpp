#pragma once

#include <string>
#include <vector>

#include "jmppc/gof.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/replicate.hpp"

namespace jmppc {

// the seven statistics run by "all", in reporting order
const std::vector<std::string>& all_statistics();

// Aligns the observed data with the replicates (outcome transform onto the
// model scale, dynamic-regime risk-set and measurement filtering) and runs the
// requested statistics.
std::vector<CheckReport> run_checks(const JointDataset& observed, const ModelSpec& spec,
                                    const ReplicatedData& reps,
                                    const std::vector<std::string>& statistics,
                                    const GofOptions& options);

CheckReport run_check(const JointDataset& observed, const ModelSpec& spec,
                      const ReplicatedData& reps, const std::string& statistic,
                      const GofOptions& options);

}  // namespace jmppc
