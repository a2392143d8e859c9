#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jmppc/data.hpp"
#include "jmppc/draws.hpp"
#include "jmppc/fitter.hpp"
#include "jmppc/model_spec.hpp"
#include "jmppc/ranef.hpp"

namespace jmppc {

enum class Regime { posterior_posterior, posterior_prior, dynamic_landmark, cross_validated };

std::string regime_name(Regime regime);
Regime regime_from_name(const std::string& name);

// how held-out subjects are replicated in the cross-validated regime
enum class CvStyle { prior, dynamic_at_observed_T };

struct ReplicatedSubject {
  std::string id;
  std::vector<double> times;
  std::vector<double> values;
  double event_time = 0;   // simulated event time, or the horizon when censored
  int event_indicator = 0; // 0: ran past the horizon
};

struct Replicate {
  int draw_index = 0;  // which posterior draw generated this replicate
  std::vector<ReplicatedSubject> subjects;
};

struct ReplicatedData {
  Regime regime = Regime::posterior_posterior;
  double landmark = 0;  // t_L; meaningful for the dynamic regime only
  CvStyle cv_style = CvStyle::prior;
  int n_folds = 0;
  std::uint64_t seed = 0;
  std::vector<Replicate> replicates;
  // cross-validated provenance: the fold each subject was held out in
  std::map<std::string, int> generating_fold;
};

// Random effects taken from the stored per-subject draws; responses are
// simulated at each subject's observed times and the event time is simulated
// from zero, independently of the responses given (theta, b).
ReplicatedData replicate_posterior_posterior(const JointDataset& data, const ModelSpec& spec,
                                             const PosteriorDraws& draws, int n_replicates,
                                             std::uint64_t seed, int threads = 0);

// Same replication kernel, but the random effects are re-sampled from their
// conditional distribution given the subject's full data via MH. Works with
// draws that carry no stored random effects (external or degenerate draws).
ReplicatedData replicate_posterior_posterior_mh(const JointDataset& data, const ModelSpec& spec,
                                                const PosteriorDraws& draws, int n_replicates,
                                                const MHConfig& mh, std::uint64_t seed,
                                                int threads = 0);

// Random effects from their prior N(0, D); responses and event time share the
// same b, and responses are truncated at the simulated event time.
ReplicatedData replicate_posterior_prior(const JointDataset& data, const ModelSpec& spec,
                                         const PosteriorDraws& draws, int n_replicates,
                                         std::uint64_t seed, int threads = 0);

// Subjects still at risk at t_L; random effects conditional on the data
// observed up to t_L and survival to t_L; responses at observed times after
// t_L; event times from the conditional distribution given T > t_L.
ReplicatedData replicate_dynamic(const JointDataset& data, const ModelSpec& spec,
                                 const PosteriorDraws& draws, double t_L, int n_replicates,
                                 const MHConfig& mh, std::uint64_t seed, int threads = 0);

// Fits the model V times on the fold complements and replicates each held-out
// subject from its complement fit, pooling folds into one ReplicatedData.
// prior: posterior-prior kernel. dynamic_at_observed_T: random effects
// conditional on the subject's full data (t_L = T_j, observed event state) via
// MH, then the posterior-posterior kernel.
ReplicatedData replicate_cross_validated(const JointDataset& data, const ModelSpec& spec,
                                         const PriorConfig& priors, const McmcConfig& mcmc,
                                         const FoldAssignment& folds, CvStyle style,
                                         int n_replicates, const MHConfig& mh, std::uint64_t seed,
                                         int threads = 0);

// directory of one CSV per replicate plus manifest.json
void save_replicated_data(const ReplicatedData& rep, const std::string& directory);
ReplicatedData load_replicated_data(const std::string& directory);

}  // namespace jmppc
