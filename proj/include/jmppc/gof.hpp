#pragma once

#include <limits>
#include <string>
#include <vector>

#include "jmppc/data.hpp"
#include "jmppc/loess.hpp"
#include "jmppc/replicate.hpp"

namespace jmppc {

struct Curve {
  std::vector<double> grid;    // strictly increasing
  std::vector<double> values;  // same length as grid
  std::string kind;
};

// Product-limit survival estimate with a Greenwood log-scale 95% interval.
// With no events the estimate is identically 1; past a drop to zero the
// interval degenerates to [0, 0].
struct KmCurve {
  std::vector<double> times;  // event times where the estimate drops
  std::vector<double> survival;
  std::vector<double> lower, upper;

  double survival_at(double t) const;
  double lower_at(double t) const;
  double upper_at(double t) const;
};

KmCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& indicators);

// right-continuous empirical CDF, P(X <= x); values must be sorted
double ecdf_at(const std::vector<double>& sorted_values, double x);

std::vector<double> uniform_grid(double a, double b, int n_points);

// (1/M) sum_m integral (rep_m - observed)^2 by the trapezoidal rule; all
// curves must share the observed grid
double mise(const Curve& observed, const std::vector<Curve>& replicates);

struct GofOptions {
  LoessConfig loess;
  // discard marker values more than kappa time units old (concordance)
  double kappa = std::numeric_limits<double>::infinity();
  // horizon quantile stabilizing the censoring weights (concordance)
  double tau_quantile = 0.90;
  double max_lag = 0;   // semivariogram lag cap; 0 keeps every pair
  int grid_points = 201;  // 200 trapezoid sub-intervals
  int threads = 0;
};

struct CheckReport {
  std::string statistic;
  std::string regime;
  double landmark = 0;
  std::string scope = "pooled";  // or a subject id
  Curve observed;
  std::vector<Curve> replicates;
  // optional 95% band around the observed curve, on the observed grid
  std::vector<double> band_lower, band_upper;
  // concordance risk times skipped on the observed side (undefined statistic)
  std::vector<double> skipped_times;
  double mise = 0;
};

// Longitudinal checks. Replicates too small to smooth (fewer than degree+2
// points after truncation) are dropped from the report and the MISE average.
CheckReport longitudinal_ecdf_check(const JointDataset& observed, const ReplicatedData& reps,
                                    const GofOptions& options);
CheckReport mean_function_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options, const std::string& subject_id = "");
CheckReport variance_function_check(const JointDataset& observed, const ReplicatedData& reps,
                                    const GofOptions& options);
CheckReport semivariogram_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options);

// Survival checks. The observed curve is Kaplan-Meier based (accounting for
// censoring); replicate event-time eCDFs count only simulated events, so
// horizon-truncated mass stays beyond the grid.
CheckReport survival_ecdf_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options);
// Probability integral transform u_i = (1/M) sum_m I(T*_im <= T_i); the
// Kaplan-Meier CDF of (u_i, delta_i) is compared against the cdf of the
// discrete uniform law on {0,...,M}/M (stored as the single replicate curve;
// it tends to the Uniform(0,1) cdf as M grows).
CheckReport pit_check(const JointDataset& observed, const ReplicatedData& reps,
                      const GofOptions& options);

// Concordance over the unique observed event times: among subjects at risk,
// agreement between the last marker value at or before t_k and subsequent
// event order. Observed side weighs pairs by inverse censoring probabilities;
// replicate sides count pairs directly.
CheckReport concordance_check(const JointDataset& observed, const ReplicatedData& reps,
                              const GofOptions& options);

// fraction of grid points where the pointwise mean of the replicate curves
// lies inside the observed band
double band_coverage(const CheckReport& report);

void save_check_report(const CheckReport& report, const std::string& json_path,
                       const std::string& csv_path = "");
CheckReport load_check_report(const std::string& json_path);

}  // namespace jmppc
