#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <armadillo>

#include "jmppc/replicate.hpp"
#include "jmppc/scenario.hpp"

#include "test_util.hpp"

using namespace jmppc;

namespace {

struct Setup {
  ScenarioConfig config;
  JointDataset data;
  ModelSpec spec;
  PosteriorDraws draws;  // 3 slightly perturbed copies of the generating draw, with b
};

Setup make_setup(std::uint64_t seed, int n_subjects = 25) {
  Setup s;
  s.config.n_subjects = n_subjects;
  s.data = generate_scenario_dataset(s.config, seed);
  s.spec = dgp_model_spec(s.config);
  const PosteriorDraws base = dgp_parameters(s.config);
  arma::arma_rng::set_seed(seed);
  const arma::mat L = arma::chol(s.config.D, "lower");
  for (int k = 0; k < 3; ++k) {
    ParameterDraw d = base.draws[0];
    d.beta += 0.01 * k;
    d.alpha += 0.005 * k;
    s.draws.draws.push_back(d);
    s.draws.b.push_back(L * arma::mat(4, n_subjects, arma::fill::randn));
  }
  for (const auto& subj : s.data.subjects) s.draws.b_subject_ids.push_back(subj.id);
  return s;
}

const SubjectRecord& observed(const JointDataset& data, const std::string& id) {
  for (const auto& s : data.subjects)
    if (s.id == id) return s;
  throw std::runtime_error("no such subject: " + id);
}

void check_common(const ReplicatedData& rep, const Setup& s, int M) {
  REQUIRE(static_cast<int>(rep.replicates.size()) == M);
  const int n_draws = static_cast<int>(s.draws.size());
  for (int m = 0; m < M; ++m) {
    // replicate m re-uses draw m modulo the number of stored draws
    CHECK(rep.replicates[m].draw_index == m % n_draws);
    for (const auto& subj : rep.replicates[m].subjects) {
      CHECK(subj.event_time > 0.0);
      CHECK(subj.event_time <= s.spec.horizon);
      if (subj.event_indicator == 0) CHECK(subj.event_time == s.spec.horizon);
      for (double v : subj.values) CHECK(std::isfinite(v));
    }
  }
}

}  // namespace

TEST_CASE("posterior-posterior replicates keep every observed measurement time") {
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    const Setup s = make_setup(seed);
    const int M = 5;
    const ReplicatedData rep =
        replicate_posterior_posterior(s.data, s.spec, s.draws, M, seed + 1, 1);
    CHECK(rep.regime == Regime::posterior_posterior);
    check_common(rep, s, M);
    for (const auto& r : rep.replicates) {
      REQUIRE(r.subjects.size() == s.data.n());
      for (const auto& subj : r.subjects)
        CHECK(subj.times == observed(s.data, subj.id).times);
    }
    // byte-for-byte determinism in the seed
    const ReplicatedData again =
        replicate_posterior_posterior(s.data, s.spec, s.draws, M, seed + 1, 1);
    CHECK(again.replicates[2].subjects[3].values == rep.replicates[2].subjects[3].values);
    CHECK(again.replicates[4].subjects[7].event_time == rep.replicates[4].subjects[7].event_time);
  }
}

TEST_CASE("the MH variant covers draws without stored random effects") {
  const Setup s = make_setup(31, 12);
  PosteriorDraws bare;
  bare.draws = s.draws.draws;
  expect_throw_contains([&] {
    replicate_posterior_posterior(s.data, s.spec, bare, 3, 9, 1);
  }, "carry no per-subject random effects");

  MHConfig mh;
  mh.n_iterations = 400;
  mh.burn_in = 200;
  const ReplicatedData rep =
      replicate_posterior_posterior_mh(s.data, s.spec, bare, 4, mh, 9, 1);
  check_common(rep, s, 4);
  for (const auto& r : rep.replicates)
    for (const auto& subj : r.subjects)
      CHECK(subj.times == observed(s.data, subj.id).times);
}

TEST_CASE("posterior-prior replicates truncate strictly before their own event time") {
  for (std::uint64_t seed : {41ULL, 42ULL, 43ULL}) {
    const Setup s = make_setup(seed);
    const int M = 6;
    const ReplicatedData rep =
        replicate_posterior_prior(s.data, s.spec, s.draws, M, seed + 2, 1);
    CHECK(rep.regime == Regime::posterior_prior);
    check_common(rep, s, M);
    for (const auto& r : rep.replicates) {
      REQUIRE(r.subjects.size() == s.data.n());
      for (const auto& subj : r.subjects) {
        const auto& obs_times = observed(s.data, subj.id).times;
        // a prefix of the observed schedule, cut at the simulated event time
        REQUIRE(subj.times.size() <= obs_times.size());
        for (std::size_t j = 0; j < subj.times.size(); ++j) {
          CHECK(subj.times[j] == obs_times[j]);
          CHECK(subj.times[j] < subj.event_time);
        }
        // the first observed time dropped by truncation must not precede T*
        if (subj.times.size() < obs_times.size())
          CHECK(obs_times[subj.times.size()] >= subj.event_time);
        REQUIRE(!subj.times.empty());
        CHECK(subj.times.front() == 0.0);
      }
    }
  }
}

TEST_CASE("dynamic replicates honor the landmark support constraints") {
  for (std::uint64_t seed : {61ULL, 62ULL}) {
    const Setup s = make_setup(seed);
    const double t_L = 18.0;
    std::set<std::string> risk;
    for (const auto& subj : s.data.subjects)
      if (subj.event_time > t_L) risk.insert(subj.id);
    REQUIRE(!risk.empty());

    MHConfig mh;
    mh.n_iterations = 300;
    mh.burn_in = 150;
    const int M = 4;
    const ReplicatedData rep =
        replicate_dynamic(s.data, s.spec, s.draws, t_L, M, mh, seed + 3, 1);
    CHECK(rep.regime == Regime::dynamic_landmark);
    CHECK(rep.landmark == t_L);
    check_common(rep, s, M);
    for (const auto& r : rep.replicates) {
      REQUIRE(r.subjects.size() == risk.size());
      for (const auto& subj : r.subjects) {
        CHECK(risk.count(subj.id) == 1);
        CHECK(subj.event_time > t_L);
        std::vector<double> want;
        for (double t : observed(s.data, subj.id).times)
          if (t > t_L) want.push_back(t);
        CHECK(subj.times == want);
      }
    }
  }

  const Setup s = make_setup(77, 10);
  MHConfig mh;
  expect_throw_contains([&] {
    replicate_dynamic(s.data, s.spec, s.draws, 25.0, 2, mh, 1, 1);
  }, "landmark t_L must lie before the horizon");
  expect_throw_contains([&] {
    replicate_dynamic(s.data, s.spec, s.draws, -0.5, 2, mh, 1, 1);
  }, "landmark t_L must be nonnegative");
}

TEST_CASE("cross-validated replications partition subjects and record provenance") {
  const Setup s = make_setup(91, 18);
  const int V = 3;
  const FoldAssignment folds = split_folds(s.data, V, 5);

  PriorConfig priors;
  McmcConfig mcmc;
  mcmc.n_iterations = 120;
  mcmc.burn_in = 60;
  mcmc.thinning = 3;
  mcmc.seed = 17;
  MHConfig mh;
  mh.n_iterations = 240;
  mh.burn_in = 120;

  for (CvStyle style : {CvStyle::prior, CvStyle::dynamic_at_observed_T}) {
    const int M = 3;
    const ReplicatedData rep = replicate_cross_validated(s.data, s.spec, priors, mcmc, folds,
                                                         style, M, mh, 29, 1);
    CHECK(rep.regime == Regime::cross_validated);
    CHECK(rep.n_folds == V);
    CHECK(rep.cv_style == style);
    REQUIRE(rep.generating_fold.size() == s.data.n());
    for (const auto& subj : s.data.subjects) {
      const auto it = rep.generating_fold.find(subj.id);
      REQUIRE(it != rep.generating_fold.end());
      CHECK(it->second == folds.fold_of_subject.at(subj.id));
      CHECK(it->second >= 1);
      CHECK(it->second <= V);
    }
    for (const auto& r : rep.replicates) {
      // the fold pieces reassemble every subject exactly once
      std::multiset<std::string> ids;
      for (const auto& subj : r.subjects) ids.insert(subj.id);
      CHECK(ids.size() == s.data.n());
      for (const auto& subj : s.data.subjects) CHECK(ids.count(subj.id) == 1);
      for (const auto& subj : r.subjects) {
        const auto& obs_times = observed(s.data, subj.id).times;
        if (style == CvStyle::dynamic_at_observed_T) {
          CHECK(subj.times == obs_times);  // posterior-posterior kernel
        } else {
          for (std::size_t j = 0; j < subj.times.size(); ++j) {
            CHECK(subj.times[j] == obs_times[j]);
            CHECK(subj.times[j] < subj.event_time);
          }
        }
      }
    }
  }
}

TEST_CASE("replicated data survives a save/load round trip") {
  const Setup s = make_setup(101, 8);
  const ReplicatedData rep = replicate_posterior_prior(s.data, s.spec, s.draws, 3, 55, 1);
  const std::string dir = "test_replicate_roundtrip";
  save_replicated_data(rep, dir);
  const ReplicatedData back = load_replicated_data(dir);
  CHECK(back.regime == rep.regime);
  CHECK(back.seed == rep.seed);
  REQUIRE(back.replicates.size() == rep.replicates.size());
  for (std::size_t m = 0; m < rep.replicates.size(); ++m) {
    CHECK(back.replicates[m].draw_index == rep.replicates[m].draw_index);
    REQUIRE(back.replicates[m].subjects.size() == rep.replicates[m].subjects.size());
    for (std::size_t i = 0; i < rep.replicates[m].subjects.size(); ++i) {
      const auto &a = rep.replicates[m].subjects[i], &b = back.replicates[m].subjects[i];
      CHECK(a.id == b.id);
      CHECK(a.times == b.times);
      CHECK(a.values == b.values);
      CHECK(a.event_time == b.event_time);
      CHECK(a.event_indicator == b.event_indicator);
    }
  }
  std::filesystem::remove_all(dir);
}
