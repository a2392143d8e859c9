#include "jmppc/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "jmppc/csv.hpp"
#include "jmppc/rng.hpp"

namespace jmppc {

std::size_t JointDataset::total_measurements() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.times.size();
  return n;
}

double JointDataset::max_event_time() const {
  if (subjects.empty()) throw std::runtime_error("empty dataset");
  double m = subjects.front().event_time;
  for (const auto& s : subjects) m = std::max(m, s.event_time);
  return m;
}

int JointDataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < subjects.size(); ++i)
    if (subjects[i].id == id) return static_cast<int>(i);
  return -1;
}

void validate_dataset(const JointDataset& data) {
  if (data.subjects.empty()) throw std::runtime_error("dataset has no subjects");
  std::unordered_map<std::string, int> seen;
  for (const auto& s : data.subjects) {
    if (s.id.empty()) throw std::runtime_error("empty subject id");
    if (++seen[s.id] > 1) throw std::runtime_error("duplicate subject id: " + s.id);
    if (!std::isfinite(s.event_time) || s.event_time < 0)
      throw std::runtime_error("subject " + s.id + ": invalid event time");
    if (s.event_indicator != 0 && s.event_indicator != 1)
      throw std::runtime_error("subject " + s.id + ": event indicator must be 0 or 1");
    if (s.times.size() != s.values.size())
      throw std::runtime_error("subject " + s.id + ": times/values length mismatch");
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      if (!std::isfinite(s.times[k]) || !std::isfinite(s.values[k]))
        throw std::runtime_error("subject " + s.id + ": NaN or infinite measurement");
      if (s.times[k] < 0) throw std::runtime_error("subject " + s.id + ": negative time");
      if (k > 0 && s.times[k] <= s.times[k - 1])
        throw std::runtime_error("subject " + s.id + ": non-increasing measurement times");
      if (s.times[k] >= s.event_time)
        throw std::runtime_error("subject " + s.id + ": measurement at or after event time");
    }
    for (const auto& name : data.covariate_names) {
      auto it = s.covariates.find(name);
      if (it == s.covariates.end())
        throw std::runtime_error("subject " + s.id + ": missing covariate " + name);
      if (!std::isfinite(it->second))
        throw std::runtime_error("subject " + s.id + ": non-finite covariate " + name);
    }
  }
}

JointDataset load_joint_dataset(const std::string& longitudinal_path,
                                const std::string& survival_path) {
  const CsvTable lt = read_csv(longitudinal_path);
  const CsvTable st = read_csv(survival_path);

  const int lid = lt.col("id"), ltime = lt.col("time"), lval = lt.col("value");
  if (lid < 0 || ltime < 0 || lval < 0)
    throw std::runtime_error(longitudinal_path + ": need columns id,time,value");
  if (lt.header.size() != 3)
    throw std::runtime_error(longitudinal_path +
                             ": unexpected extra columns; time-varying covariates are not supported");

  const int sid = st.col("id"), set = st.col("event_time"), sev = st.col("event_indicator");
  if (sid < 0 || set < 0 || sev < 0)
    throw std::runtime_error(survival_path + ": need columns id,event_time,event_indicator");

  JointDataset data;
  for (std::size_t c = 0; c < st.header.size(); ++c)
    if (static_cast<int>(c) != sid && static_cast<int>(c) != set && static_cast<int>(c) != sev)
      data.covariate_names.push_back(st.header[c]);

  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& row : st.rows) {
    SubjectRecord s;
    s.id = row[sid];
    if (pos.count(s.id)) throw std::runtime_error(survival_path + ": duplicate subject id " + s.id);
    s.event_time = parse_double(row[set], survival_path + " event_time of " + s.id);
    s.event_indicator =
        static_cast<int>(parse_long(row[sev], survival_path + " event_indicator of " + s.id));
    for (std::size_t c = 0; c < st.header.size(); ++c)
      if (static_cast<int>(c) != sid && static_cast<int>(c) != set && static_cast<int>(c) != sev)
        s.covariates[st.header[c]] =
            parse_double(row[c], survival_path + " " + st.header[c] + " of " + s.id);
    pos[s.id] = data.subjects.size();
    data.subjects.push_back(std::move(s));
  }

  for (const auto& row : lt.rows) {
    const std::string& id = row[lid];
    auto it = pos.find(id);
    if (it == pos.end())
      throw std::runtime_error("missing id cross-reference: longitudinal subject " + id +
                               " absent from survival file");
    SubjectRecord& s = data.subjects[it->second];
    s.times.push_back(parse_double(row[ltime], longitudinal_path + " time of " + id));
    s.values.push_back(parse_double(row[lval], longitudinal_path + " value of " + id));
  }

  for (const auto& s : data.subjects)
    if (s.times.empty())
      throw std::runtime_error("missing id cross-reference: survival subject " + s.id +
                               " has no longitudinal rows");

  validate_dataset(data);
  return data;
}

void save_joint_dataset(const JointDataset& data, const std::string& longitudinal_path,
                        const std::string& survival_path) {
  for (const auto& s : data.subjects)
    if (s.id.find(',') != std::string::npos || s.id.find('"') != std::string::npos)
      throw std::runtime_error("subject id not CSV-safe: " + s.id);

  std::vector<std::vector<std::string>> lrows;
  for (const auto& s : data.subjects)
    for (std::size_t k = 0; k < s.times.size(); ++k)
      lrows.push_back({s.id, format_g17(s.times[k]), format_g17(s.values[k])});
  write_csv(longitudinal_path, {"id", "time", "value"}, lrows);

  std::vector<std::string> sheader = {"id", "event_time", "event_indicator"};
  for (const auto& c : data.covariate_names) sheader.push_back(c);
  std::vector<std::vector<std::string>> srows;
  for (const auto& s : data.subjects) {
    std::vector<std::string> row = {s.id, format_g17(s.event_time),
                                    std::to_string(s.event_indicator)};
    for (const auto& c : data.covariate_names) row.push_back(format_g17(s.covariates.at(c)));
    srows.push_back(std::move(row));
  }
  write_csv(survival_path, sheader, srows);
}

FoldAssignment split_folds(const JointDataset& data, int n_folds, std::uint64_t seed) {
  const int n = static_cast<int>(data.n());
  if (n_folds < 2) throw std::runtime_error("need at least 2 folds");
  if (n_folds > n) throw std::runtime_error("more folds than subjects");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  RngStream rng = RngStream::derive(seed, 0xF01D5ULL);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  FoldAssignment fa;
  fa.n_folds = n_folds;
  for (int i = 0; i < n; ++i) fa.fold_of_subject[data.subjects[idx[i]].id] = (i % n_folds) + 1;
  return fa;
}

}  // namespace jmppc
