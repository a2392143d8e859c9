#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <armadillo>

#include "jmppc/data.hpp"
#include "jmppc/splines.hpp"

namespace jmppc {

enum class TimeBasisKind { none, linear, natural_spline };

struct TimeBasisSpec {
  TimeBasisKind kind = TimeBasisKind::none;
  std::vector<double> internal_knots;
  double boundary_lo = 0;
  double boundary_hi = 0;
};

// columns: [intercept][time basis...][baseline covariates...]
struct DesignSpec {
  bool intercept = true;
  TimeBasisSpec time_basis;
  std::vector<std::string> covariates;
};

enum class FunctionalFormKind {
  value,             // eta(t)
  slope,             // eta'(t)
  acceleration,      // eta''(t)
  windowed_average,  // mean of eta over (max(0, t-window), t)
  windowed_curvature,// mean of eta'' over (max(0, t-window), t)
  integral_average   // mean of eta over (0, t)
};

struct FunctionalForm {
  FunctionalFormKind kind = FunctionalFormKind::value;
  double window = 0;  // required by the windowed forms
};

struct BaselineHazardSpec {
  enum class Kind { weibull, bspline } kind = Kind::bspline;
  double weibull_shape = 1.0;
  int degree = 3;
  std::vector<double> interior_knots;  // on the transformed scale
  double boundary_lo = 0;
  double boundary_hi = 0;
  TimeTransform transform = TimeTransform::identity;
};

struct SurvivalDesign {
  bool intercept = false;  // excluded when a b-spline log-baseline carries it
  std::vector<std::string> covariates;
};

enum class OutcomeTransform { identity, exp_value };

struct ModelSpec {
  DesignSpec fixed_design;
  DesignSpec random_design;
  FunctionalForm functional_form;
  BaselineHazardSpec baseline_hazard;
  SurvivalDesign survival_design;
  OutcomeTransform outcome_transform = OutcomeTransform::identity;
  double horizon = 0;  // upper bound for simulated event times

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
  void save(const std::string& path) const;
  static ModelSpec load(const std::string& path);
};

// compiled design evaluator for one DesignSpec
class DesignEval {
 public:
  explicit DesignEval(const DesignSpec& spec);
  int dim() const { return dim_; }
  // design row at time t (deriv applied to the time part; intercept and
  // covariates vanish for deriv > 0)
  void row(double t, const SubjectRecord& subject, int deriv, arma::vec& out) const;
  arma::vec row(double t, const SubjectRecord& subject, int deriv = 0) const;
  const std::vector<double>& time_knots() const { return time_knots_; }

 private:
  DesignSpec spec_;
  std::optional<NaturalSplineBasis> ns_;
  std::vector<double> time_knots_;
  int dim_ = 0;
};

// compiled model: shared, immutable evaluators for a ModelSpec
class ModelEval {
 public:
  explicit ModelEval(const ModelSpec& spec);
  const ModelSpec& spec() const { return spec_; }
  const DesignEval& fixed() const { return fixed_; }
  const DesignEval& random() const { return random_; }

  int p() const { return fixed_.dim(); }
  int q() const { return random_.dim(); }
  int n_gamma() const;
  int n_gh0() const;  // 0 for the weibull baseline

  arma::vec survival_covariate_row(const SubjectRecord& subject) const;
  // log baseline hazard pieces
  double log_h0_weibull(double t) const;
  arma::vec h0_basis_row(double t) const;  // b-spline basis at r(t)
  const BSplineBasis* h0_basis() const { return h0_basis_ ? &*h0_basis_ : nullptr; }
  // cut points (original time scale) for hazard quadrature panels
  std::vector<double> hazard_cuts() const;

 private:
  ModelSpec spec_;
  DesignEval fixed_;
  DesignEval random_;
  std::optional<BSplineBasis> h0_basis_;
};

double apply_outcome_transform(OutcomeTransform tr, double y);

// copy of the dataset with responses moved onto the model scale; fitting and
// replicate conditioning expect model-scale data
JointDataset transform_outcome(const JointDataset& data, OutcomeTransform tr);

}  // namespace jmppc
