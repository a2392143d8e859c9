#pragma once

#include <vector>

#include <armadillo>

namespace jmppc {

enum class TimeTransform { identity, log_time };

// log transform clamps its argument at eps so hazard code can evaluate at t=0
double apply_time_transform(TimeTransform tr, double t);

// B-spline basis on a clamped knot sequence. Evaluation is in the transformed
// scale u = r(t); derivatives are supported for the identity transform only.
struct BSplineBasis {
  int degree = 3;
  arma::vec knots;  // full nondecreasing sequence, boundary knots repeated degree+1 times
  bool include_intercept = true;  // when false the first basis column is dropped
  TimeTransform transform = TimeTransform::identity;

  static BSplineBasis clamped(int degree, const std::vector<double>& interior_knots,
                              double boundary_lo, double boundary_hi,
                              bool include_intercept = true,
                              TimeTransform transform = TimeTransform::identity);

  int n_basis() const;
  double domain_lo() const;
  double domain_hi() const;

  // basis values (or derivative of given order) at t; error outside the domain
  arma::vec eval(double t, int deriv = 0) const;
  arma::mat eval_matrix(const arma::vec& ts, int deriv = 0) const;
};

// Natural cubic spline basis: cubic B-splines constrained to zero second
// derivative at the boundary knots, intercept column excluded, with linear
// extrapolation beyond the boundary. Spans internal_knots.size() + 1 columns.
struct NaturalSplineBasis {
  std::vector<double> internal_knots;
  double boundary_lo = 0;
  double boundary_hi = 0;
  BSplineBasis cubic;
  arma::mat constraint_null;  // (n_bspline - 1) x (n_bspline - 3)

  static NaturalSplineBasis make(const std::vector<double>& internal_knots,
                                 double boundary_lo, double boundary_hi);

  int n_basis() const { return static_cast<int>(internal_knots.size()) + 1; }
  arma::vec eval(double t, int deriv = 0) const;
  arma::mat eval_matrix(const arma::vec& ts, int deriv = 0) const;
};

// interior knots at equally spaced quantiles for a clamped basis of n_basis
std::vector<double> quantile_interior_knots(std::vector<double> values, int n_basis, int degree);

}  // namespace jmppc
