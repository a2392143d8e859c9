#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jmppc {

struct SubjectRecord {
  std::string id;
  std::vector<double> times;   // strictly increasing, all < event_time
  std::vector<double> values;
  double event_time = 0;
  int event_indicator = 0;     // 1 event, 0 censored
  std::map<std::string, double> covariates;  // baseline only
};

struct JointDataset {
  std::vector<SubjectRecord> subjects;
  std::vector<std::string> covariate_names;

  std::size_t n() const { return subjects.size(); }
  std::size_t total_measurements() const;
  double max_event_time() const;
  int index_of(const std::string& id) const;  // -1 when absent
};

void validate_dataset(const JointDataset& data);

// longitudinal CSV: id,time,value; survival CSV: id,event_time,event_indicator,<covariates...>
JointDataset load_joint_dataset(const std::string& longitudinal_path,
                                const std::string& survival_path);
void save_joint_dataset(const JointDataset& data, const std::string& longitudinal_path,
                        const std::string& survival_path);

struct FoldAssignment {
  int n_folds = 0;
  std::map<std::string, int> fold_of_subject;  // fold index in 1..V
};

// subject-level folds, sizes differing by at most one, deterministic in seed
FoldAssignment split_folds(const JointDataset& data, int n_folds, std::uint64_t seed);

}  // namespace jmppc
