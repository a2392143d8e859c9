#pragma once

#include <cstddef>
#include <vector>

namespace jmppc {

struct LoessConfig {
  double span = 0.75;            // fraction of points in each local window
  int degree = 2;                // local polynomial degree (0, 1, or 2)
  int robustness_iterations = 0; // bisquare reweighting passes
};

// Local polynomial regression with tricube weights over the span-nearest
// neighbors of each target point.
class LoessFit {
 public:
  LoessFit(const std::vector<double>& x, const std::vector<double>& y, LoessConfig config);

  double predict(double x0) const;
  std::vector<double> predict(const std::vector<double>& grid) const;

  // fitted values at the training points (original input order) plus the
  // smoother-matrix trace, in a single pass
  void training_fit(std::vector<double>& fitted, double& df) const;
  // trace of the smoother matrix over the training points
  double effective_df() const;
  std::size_t n() const { return x_.size(); }

 private:
  struct Local {
    double value = 0;
    double self_weight = 0;
  };
  Local fit_at(double x0, bool at_training_point) const;

  std::vector<double> x_, y_, robust_w_;
  std::vector<std::size_t> order_;  // original index of each sorted point
  LoessConfig cfg_;
  std::size_t window_ = 0;
  mutable double df_ = -1;
};

}  // namespace jmppc
