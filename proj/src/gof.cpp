#include "jmppc/gof.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "jmppc/csv.hpp"
#include "jmppc/parallel.hpp"
#include "jmppc/stats.hpp"

namespace jmppc {

namespace {

// longitudinal rows grouped by subject plus the event outcome, the common
// shape of observed datasets and replicates
struct FlatData {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> times;
  std::vector<std::vector<double>> values;
  std::vector<double> T;
  std::vector<int> delta;

  std::size_t n() const { return ids.size(); }
};

FlatData flatten(const JointDataset& data) {
  FlatData f;
  for (const auto& s : data.subjects) {
    f.ids.push_back(s.id);
    f.times.push_back(s.times);
    f.values.push_back(s.values);
    f.T.push_back(s.event_time);
    f.delta.push_back(s.event_indicator);
  }
  return f;
}

FlatData flatten(const Replicate& rep) {
  FlatData f;
  for (const auto& s : rep.subjects) {
    f.ids.push_back(s.id);
    f.times.push_back(s.times);
    f.values.push_back(s.values);
    f.T.push_back(s.event_time);
    f.delta.push_back(s.event_indicator);
  }
  return f;
}

void pool_rows(const FlatData& f, std::vector<double>& t, std::vector<double>& y,
               const std::string& subject_id = "") {
  t.clear();
  y.clear();
  for (std::size_t i = 0; i < f.n(); ++i) {
    if (!subject_id.empty() && f.ids[i] != subject_id) continue;
    t.insert(t.end(), f.times[i].begin(), f.times[i].end());
    y.insert(y.end(), f.values[i].begin(), f.values[i].end());
  }
}

bool loess_usable(std::size_t n_points, const LoessConfig& cfg) {
  if (n_points < static_cast<std::size_t>(cfg.degree) + 2) return false;
  const std::size_t window = static_cast<std::size_t>(cfg.span * static_cast<double>(n_points));
  return window >= static_cast<std::size_t>(cfg.degree) + 1;
}

Curve loess_curve(const std::vector<double>& x, const std::vector<double>& y,
                  const LoessConfig& cfg, const std::vector<double>& grid,
                  const std::string& kind) {
  const LoessFit fit(x, y, cfg);
  Curve c;
  c.grid = grid;
  c.values = fit.predict(grid);
  c.kind = kind;
  return c;
}

struct Detrended {
  std::vector<double> t;
  std::vector<double> r;       // loess residuals, in pooled row order
  double sigma_hat = 0;
  bool sigma_valid = false;
};

Detrended detrend(const std::vector<double>& t, const std::vector<double>& y,
                  const LoessConfig& cfg) {
  Detrended d;
  d.t = t;
  const LoessFit fit(t, y, cfg);
  std::vector<double> fitted;
  double df = 0;
  fit.training_fit(fitted, df);
  d.r.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) d.r[i] = y[i] - fitted[i];
  const double N = static_cast<double>(t.size());
  if (N > df) {
    double ss = 0;
    for (double r : d.r) ss += r * r;
    d.sigma_hat = std::sqrt(ss / (N - df));
    d.sigma_valid = d.sigma_hat > 0;
  }
  return d;
}

void base_report(CheckReport& report, const std::string& statistic, const ReplicatedData& reps) {
  report.statistic = statistic;
  report.regime = regime_name(reps.regime);
  report.landmark = reps.landmark;
}

std::map<std::string, std::size_t> index_by_id(const FlatData& f) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < f.n(); ++i) m[f.ids[i]] = i;
  return m;
}

double finite_min(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double finite_max(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

double KmCurve::survival_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::lower_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return lower[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::upper_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return upper[static_cast<std::size_t>(it - times.begin()) - 1];
}

KmCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& indicators) {
  if (times.empty()) throw std::runtime_error("kaplan_meier: empty input");
  if (times.size() != indicators.size())
    throw std::runtime_error("kaplan_meier: times and indicators differ in length");
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!(times[i] >= 0) || !std::isfinite(times[i]))
      throw std::runtime_error("kaplan_meier: times must be finite and nonnegative");
    if (indicators[i] != 0 && indicators[i] != 1)
      throw std::runtime_error("kaplan_meier: indicators must be 0 or 1");
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve km;
  double s = 1.0, greenwood = 0.0;
  double at_risk = static_cast<double>(times.size());
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    double d = 0, c = 0;
    while (i < order.size() && times[order[i]] == t) {
      if (indicators[order[i]] == 1)
        d += 1;
      else
        c += 1;
      ++i;
    }
    if (d > 0) {
      s *= 1.0 - d / at_risk;
      if (at_risk > d)
        greenwood += d / (at_risk * (at_risk - d));
      else
        greenwood = std::numeric_limits<double>::infinity();
      km.times.push_back(t);
      km.survival.push_back(s);
      if (s > 0 && std::isfinite(greenwood)) {
        const double half = 1.959963984540054 * std::sqrt(greenwood);
        km.lower.push_back(std::max(s * std::exp(-half), 0.0));
        km.upper.push_back(std::min(s * std::exp(half), 1.0));
      } else {
        km.lower.push_back(0.0);
        km.upper.push_back(s > 0 ? 1.0 : 0.0);
      }
    }
    at_risk -= d + c;
  }
  return km;
}

double ecdf_at(const std::vector<double>& sorted_values, double x) {
  if (sorted_values.empty()) throw std::runtime_error("ecdf of empty sample");
  const auto it = std::upper_bound(sorted_values.begin(), sorted_values.end(), x);
  return static_cast<double>(it - sorted_values.begin()) /
         static_cast<double>(sorted_values.size());
}

std::vector<double> uniform_grid(double a, double b, int n_points) {
  if (!(a < b)) throw std::runtime_error("grid range is degenerate");
  if (n_points < 2) throw std::runtime_error("grid needs at least 2 points");
  std::vector<double> g(n_points);
  for (int k = 0; k < n_points; ++k)
    g[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n_points - 1);
  g.back() = b;
  return g;
}

double mise(const Curve& observed, const std::vector<Curve>& replicates) {
  if (observed.grid.size() < 2) throw std::runtime_error("mise needs at least 2 grid points");
  if (replicates.empty()) throw std::runtime_error("mise needs at least one replicate curve");
  double total = 0;
  for (const auto& rep : replicates) {
    if (rep.grid != observed.grid)
      throw std::runtime_error("mise: replicate curve grid differs from the observed grid");
    double integral = 0;
    for (std::size_t k = 0; k + 1 < observed.grid.size(); ++k) {
      const double d0 = rep.values[k] - observed.values[k];
      const double d1 = rep.values[k + 1] - observed.values[k + 1];
      integral += 0.5 * (d0 * d0 + d1 * d1) * (observed.grid[k + 1] - observed.grid[k]);
    }
    total += integral;
  }
  return total / static_cast<double>(replicates.size());
}

CheckReport longitudinal_ecdf_check(const JointDataset& observed, const ReplicatedData& reps,
                                    const GofOptions& options) {
  CheckReport report;
  base_report(report, "ecdf_longitudinal", reps);
  const FlatData obs = flatten(observed);
  std::vector<double> t, y;
  pool_rows(obs, t, y);
  if (y.empty()) throw std::runtime_error("no longitudinal measurements in the observed data");
  std::sort(y.begin(), y.end());
  const std::vector<double> grid = uniform_grid(y.front(), y.back(), options.grid_points);
  report.observed.grid = grid;
  report.observed.kind = "ecdf";
  for (double g : grid) report.observed.values.push_back(ecdf_at(y, g));

  report.replicates.resize(reps.replicates.size());
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    std::vector<double> rt, ry;
    pool_rows(flatten(reps.replicates[m]), rt, ry);
    Curve c;
    c.grid = grid;
    c.kind = "ecdf";
    if (ry.empty()) {
      c.values.assign(grid.size(), 0.0);
    } else {
      std::sort(ry.begin(), ry.end());
      for (double g : grid) c.values.push_back(ecdf_at(ry, g));
    }
    report.replicates[m] = std::move(c);
  });
  report.mise = mise(report.observed, report.replicates);
  return report;
}

CheckReport mean_function_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options, const std::string& subject_id) {
  CheckReport report;
  base_report(report, "mean", reps);
  report.scope = subject_id.empty() ? "pooled" : subject_id;
  const FlatData obs = flatten(observed);
  if (!subject_id.empty() && observed.index_of(subject_id) < 0)
    throw std::runtime_error("subject " + subject_id + " not in the observed data");
  std::vector<double> t, y;
  pool_rows(obs, t, y, subject_id);
  if (!loess_usable(t.size(), options.loess))
    throw std::runtime_error("too few measurements to smooth" +
                             (subject_id.empty() ? std::string()
                                                 : " for subject " + subject_id));
  const std::vector<double> grid =
      uniform_grid(finite_min(t), finite_max(t), options.grid_points);
  report.observed = loess_curve(t, y, options.loess, grid, "loess_mean");

  std::vector<Curve> cand(reps.replicates.size());
  std::vector<char> ok(reps.replicates.size(), 0);
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    std::vector<double> rt, ry;
    pool_rows(flatten(reps.replicates[m]), rt, ry, subject_id);
    if (!loess_usable(rt.size(), options.loess)) return;
    cand[m] = loess_curve(rt, ry, options.loess, grid, "loess_mean");
    ok[m] = 1;
  });
  for (std::size_t m = 0; m < cand.size(); ++m)
    if (ok[m]) report.replicates.push_back(std::move(cand[m]));
  if (report.replicates.empty())
    throw std::runtime_error("no replicate had enough measurements to smooth");
  report.mise = mise(report.observed, report.replicates);
  return report;
}

CheckReport variance_function_check(const JointDataset& observed, const ReplicatedData& reps,
                                    const GofOptions& options) {
  CheckReport report;
  base_report(report, "variance", reps);
  const FlatData obs = flatten(observed);
  std::vector<double> t, y;
  pool_rows(obs, t, y);
  if (!loess_usable(t.size(), options.loess))
    throw std::runtime_error("too few measurements to smooth");
  const Detrended od = detrend(t, y, options.loess);
  if (!od.sigma_valid)
    throw std::runtime_error("residual degrees of freedom exhausted by the smoother");
  std::vector<double> rbreve(od.r.size());
  for (std::size_t i = 0; i < od.r.size(); ++i)
    rbreve[i] = std::sqrt(std::abs(od.r[i] / od.sigma_hat));
  const std::vector<double> grid =
      uniform_grid(finite_min(t), finite_max(t), options.grid_points);
  report.observed = loess_curve(t, rbreve, options.loess, grid, "loess_variance");

  std::vector<Curve> cand(reps.replicates.size());
  std::vector<char> ok(reps.replicates.size(), 0);
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    std::vector<double> rt, ry;
    pool_rows(flatten(reps.replicates[m]), rt, ry);
    if (!loess_usable(rt.size(), options.loess)) return;
    const Detrended rd = detrend(rt, ry, options.loess);
    if (!rd.sigma_valid) return;
    std::vector<double> rb(rd.r.size());
    for (std::size_t i = 0; i < rd.r.size(); ++i)
      rb[i] = std::sqrt(std::abs(rd.r[i] / rd.sigma_hat));
    cand[m] = loess_curve(rt, rb, options.loess, grid, "loess_variance");
    ok[m] = 1;
  });
  for (std::size_t m = 0; m < cand.size(); ++m)
    if (ok[m]) report.replicates.push_back(std::move(cand[m]));
  if (report.replicates.empty())
    throw std::runtime_error("no replicate had enough measurements to smooth");
  report.mise = mise(report.observed, report.replicates);
  return report;
}

namespace {

// per-subject half squared differences of detrended responses vs time lags
void variogram_pairs(const FlatData& f, const std::vector<double>& resid, double max_lag,
                     std::vector<double>& u, std::vector<double>& delta) {
  u.clear();
  delta.clear();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < f.n(); ++i) {
    const std::size_t ni = f.times[i].size();
    for (std::size_t j = 0; j < ni; ++j)
      for (std::size_t k = j + 1; k < ni; ++k) {
        const double lag = std::abs(f.times[i][j] - f.times[i][k]);
        if (max_lag > 0 && lag > max_lag) continue;
        const double dr = resid[offset + j] - resid[offset + k];
        u.push_back(lag);
        delta.push_back(0.5 * dr * dr);
      }
    offset += ni;
  }
}

}  // namespace

CheckReport semivariogram_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options) {
  CheckReport report;
  base_report(report, "semivariogram", reps);
  const FlatData obs = flatten(observed);
  std::vector<double> t, y;
  pool_rows(obs, t, y);
  if (!loess_usable(t.size(), options.loess))
    throw std::runtime_error("too few measurements to smooth");
  const Detrended od = detrend(t, y, options.loess);
  std::vector<double> u, dl;
  variogram_pairs(obs, od.r, options.max_lag, u, dl);
  if (u.empty())
    throw std::runtime_error("semivariogram needs a subject with at least 2 measurements");
  if (!loess_usable(u.size(), options.loess))
    throw std::runtime_error("too few measurement pairs to smooth");
  const std::vector<double> grid =
      uniform_grid(finite_min(u), finite_max(u), options.grid_points);
  report.observed = loess_curve(u, dl, options.loess, grid, "semivariogram");

  std::vector<Curve> cand(reps.replicates.size());
  std::vector<char> ok(reps.replicates.size(), 0);
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    const FlatData f = flatten(reps.replicates[m]);
    std::vector<double> rt, ry;
    pool_rows(f, rt, ry);
    if (!loess_usable(rt.size(), options.loess)) return;
    const Detrended rd = detrend(rt, ry, options.loess);
    std::vector<double> ru, rdl;
    variogram_pairs(f, rd.r, options.max_lag, ru, rdl);
    if (!loess_usable(ru.size(), options.loess)) return;
    cand[m] = loess_curve(ru, rdl, options.loess, grid, "semivariogram");
    ok[m] = 1;
  });
  for (std::size_t m = 0; m < cand.size(); ++m)
    if (ok[m]) report.replicates.push_back(std::move(cand[m]));
  if (report.replicates.empty())
    throw std::runtime_error("no replicate had enough measurement pairs to smooth");
  report.mise = mise(report.observed, report.replicates);
  return report;
}

CheckReport survival_ecdf_check(const JointDataset& observed, const ReplicatedData& reps,
                                const GofOptions& options) {
  CheckReport report;
  base_report(report, "ecdf_survival", reps);
  const FlatData obs = flatten(observed);
  const KmCurve km = kaplan_meier(obs.T, obs.delta);
  const std::vector<double> grid =
      uniform_grid(finite_min(obs.T), finite_max(obs.T), options.grid_points);
  report.observed.grid = grid;
  report.observed.kind = "km_ecdf";
  for (double g : grid) {
    report.observed.values.push_back(1.0 - km.survival_at(g));
    report.band_lower.push_back(1.0 - km.upper_at(g));
    report.band_upper.push_back(1.0 - km.lower_at(g));
  }

  report.replicates.resize(reps.replicates.size());
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    const FlatData f = flatten(reps.replicates[m]);
    std::vector<double> events;
    for (std::size_t i = 0; i < f.n(); ++i)
      if (f.delta[i] == 1) events.push_back(f.T[i]);
    std::sort(events.begin(), events.end());
    Curve c;
    c.grid = grid;
    c.kind = "ecdf";
    const double n_total = static_cast<double>(f.n());
    for (double g : grid) {
      const auto it = std::upper_bound(events.begin(), events.end(), g);
      c.values.push_back(static_cast<double>(it - events.begin()) / n_total);
    }
    report.replicates[m] = std::move(c);
  });
  report.mise = mise(report.observed, report.replicates);
  return report;
}

CheckReport pit_check(const JointDataset& observed, const ReplicatedData& reps,
                      const GofOptions& options) {
  if (reps.replicates.size() < 20)
    throw std::runtime_error("pit check needs at least 20 replicates per subject");
  CheckReport report;
  base_report(report, "pit", reps);
  const FlatData obs = flatten(observed);
  const auto obs_index = index_by_id(obs);

  const std::size_t M = reps.replicates.size();
  std::vector<double> u(obs.n(), 0.0);
  std::vector<char> seen(obs.n(), 0);
  for (const auto& rep : reps.replicates) {
    for (const auto& s : rep.subjects) {
      const auto it = obs_index.find(s.id);
      if (it == obs_index.end())
        throw std::runtime_error("replicate subject " + s.id + " not in the observed data");
      seen[it->second] = 1;
      // horizon-truncated replicates never precede an observed time
      if (s.event_indicator == 1 && s.event_time <= obs.T[it->second])
        u[it->second] += 1.0;
    }
  }
  std::vector<double> u_used;
  std::vector<int> delta_used;
  for (std::size_t i = 0; i < obs.n(); ++i) {
    if (!seen[i]) continue;
    u_used.push_back(u[i] / static_cast<double>(M));
    delta_used.push_back(obs.delta[i]);
  }
  if (u_used.empty()) throw std::runtime_error("pit check found no replicated subjects");

  const KmCurve km = kaplan_meier(u_used, delta_used);
  // the estimate identifies Pr(U <= u) up to its last drop; past it the curve
  // and its interval stall, so the comparison stops there
  const double lo = finite_min(u_used);
  const double hi = km.times.empty() ? finite_max(u_used) : km.times.back();
  if (!(hi > lo)) throw std::runtime_error("pit check has a degenerate transform range");
  const std::vector<double> grid = uniform_grid(lo, hi, options.grid_points);
  report.observed.grid = grid;
  report.observed.kind = "pit";
  for (double g : grid) {
    report.observed.values.push_back(1.0 - km.survival_at(g));
    report.band_lower.push_back(1.0 - km.upper_at(g));
    report.band_upper.push_back(1.0 - km.lower_at(g));
  }
  // with M replicates per subject the transform lives on {0,...,M}/M and is
  // uniform over that set when the model is right, so the reference is the
  // exact cdf of that discrete law, not the identity line
  Curve reference;
  reference.grid = grid;
  reference.kind = "uniform_reference";
  const double m_d = static_cast<double>(M);
  for (double g : grid)
    reference.values.push_back(std::min(1.0, (std::floor(m_d * g + 1e-9) + 1.0) / (m_d + 1.0)));
  report.replicates.push_back(std::move(reference));
  report.mise = mise(report.observed, report.replicates);
  return report;
}

namespace {

struct ConcordanceInput {
  std::vector<double> T;
  std::vector<int> delta;
  std::vector<const std::vector<double>*> times;   // per subject
  std::vector<const std::vector<double>*> values;
};

ConcordanceInput concordance_input(const FlatData& f) {
  ConcordanceInput in;
  in.T = f.T;
  in.delta = f.delta;
  for (std::size_t i = 0; i < f.n(); ++i) {
    in.times.push_back(&f.times[i]);
    in.values.push_back(&f.values[i]);
  }
  return in;
}

// C(t_k) with optional inverse-censoring weights; quiet NaN when undefined
double concordance_at(const ConcordanceInput& in, double t_k, double kappa, double tau,
                      const KmCurve* censor_km) {
  std::vector<double> marker, T;
  std::vector<int> delta;
  for (std::size_t i = 0; i < in.T.size(); ++i) {
    if (in.T[i] < t_k) continue;  // not at risk
    const auto& ts = *in.times[i];
    const auto it = std::upper_bound(ts.begin(), ts.end(), t_k);
    if (it == ts.begin()) continue;  // no marker yet
    const std::size_t idx = static_cast<std::size_t>(it - ts.begin()) - 1;
    if (t_k - ts[idx] > kappa) continue;  // marker too old
    marker.push_back((*in.values[i])[idx]);
    T.push_back(in.T[i]);
    delta.push_back(in.delta[i]);
  }
  if (marker.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < marker.size(); ++i) {
    if (delta[i] != 1 || T[i] > tau) continue;
    double w = 1.0;
    if (censor_km) {
      const double g = censor_km->survival_at(T[i]);
      if (!(g > 0)) continue;
      w = 1.0 / (g * g);
    }
    for (std::size_t j = 0; j < marker.size(); ++j) {
      if (j == i || !(T[i] < T[j])) continue;
      den += w;
      if (marker[i] > marker[j])
        num += w;
      else if (marker[i] == marker[j])
        num += 0.5 * w;
    }
  }
  if (den <= 0) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

}  // namespace

CheckReport concordance_check(const JointDataset& observed, const ReplicatedData& reps,
                              const GofOptions& options) {
  CheckReport report;
  base_report(report, "concordance", reps);
  const FlatData obs = flatten(observed);
  const double tau = quantile_of(obs.T, options.tau_quantile);

  std::vector<double> risk_times{reps.landmark};
  for (std::size_t i = 0; i < obs.n(); ++i)
    if (obs.delta[i] == 1 && obs.T[i] <= tau) risk_times.push_back(obs.T[i]);
  std::sort(risk_times.begin(), risk_times.end());
  risk_times.erase(std::unique(risk_times.begin(), risk_times.end()), risk_times.end());
  if (risk_times.size() < 2)
    throw std::runtime_error("concordance needs at least 2 usable risk times");

  const KmCurve censor_km = kaplan_meier(obs.T, [&] {
    std::vector<int> flipped(obs.delta.size());
    for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - obs.delta[i];
    return flipped;
  }());

  const ConcordanceInput obs_in = concordance_input(obs);
  std::vector<double> kept_t, kept_c;
  for (double t_k : risk_times) {
    const double c = concordance_at(obs_in, t_k, options.kappa, tau, &censor_km);
    if (std::isnan(c))
      report.skipped_times.push_back(t_k);
    else {
      kept_t.push_back(t_k);
      kept_c.push_back(c);
    }
  }
  if (!loess_usable(kept_t.size(), options.loess))
    throw std::runtime_error("too few usable risk times to smooth the concordance");
  const std::vector<double> grid =
      uniform_grid(kept_t.front(), kept_t.back(), options.grid_points);
  report.observed = loess_curve(kept_t, kept_c, options.loess, grid, "concordance");

  std::vector<Curve> cand(reps.replicates.size());
  std::vector<char> ok(reps.replicates.size(), 0);
  parallel_for(reps.replicates.size(), options.threads, [&](std::size_t m) {
    const FlatData f = flatten(reps.replicates[m]);
    const ConcordanceInput in = concordance_input(f);
    std::vector<double> rt, rc;
    for (double t_k : risk_times) {
      const double c = concordance_at(in, t_k, options.kappa, tau, nullptr);
      if (!std::isnan(c)) {
        rt.push_back(t_k);
        rc.push_back(c);
      }
    }
    if (!loess_usable(rt.size(), options.loess)) return;
    cand[m] = loess_curve(rt, rc, options.loess, grid, "concordance");
    ok[m] = 1;
  });
  for (std::size_t m = 0; m < cand.size(); ++m)
    if (ok[m]) report.replicates.push_back(std::move(cand[m]));
  if (report.replicates.empty())
    throw std::runtime_error("no replicate had enough usable risk times");
  report.mise = mise(report.observed, report.replicates);
  return report;
}

double band_coverage(const CheckReport& report) {
  if (report.band_lower.empty() || report.band_upper.empty())
    throw std::runtime_error("report carries no band");
  if (report.replicates.empty()) throw std::runtime_error("report carries no replicate curves");
  // the band quantifies sampling noise on the observed side only, so the
  // replicate family is summarised by its pointwise mean before comparison;
  // individual curves would each add their own noise to the tally
  const std::size_t n_grid = report.band_lower.size();
  std::size_t inside = 0;
  for (std::size_t k = 0; k < n_grid; ++k) {
    double mean = 0.0;
    for (const auto& rep : report.replicates) mean += rep.values[k];
    mean /= static_cast<double>(report.replicates.size());
    if (mean >= report.band_lower[k] && mean <= report.band_upper[k]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(n_grid);
}

void save_check_report(const CheckReport& report, const std::string& json_path,
                       const std::string& csv_path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["statistic"] = report.statistic;
  j["regime"] = report.regime;
  j["landmark"] = report.landmark;
  j["scope"] = report.scope;
  j["mise"] = report.mise;
  j["grid"] = report.observed.grid;
  j["observed_kind"] = report.observed.kind;
  j["observed"] = report.observed.values;
  j["band_lower"] = report.band_lower;
  j["band_upper"] = report.band_upper;
  j["skipped_times"] = report.skipped_times;
  std::vector<std::vector<double>> reps;
  for (const auto& r : report.replicates) reps.push_back(r.values);
  j["replicates"] = reps;
  j["replicate_kind"] = report.replicates.empty() ? "" : report.replicates.front().kind;
  std::ofstream out(json_path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + json_path);

  if (csv_path.empty()) return;
  CsvTable table;
  table.header = {"statistic", "curve", "grid", "value"};
  auto add_curve = [&](const std::string& name, const std::vector<double>& grid,
                       const std::vector<double>& values) {
    for (std::size_t k = 0; k < grid.size(); ++k)
      table.rows.push_back({report.statistic, name, format_g17(grid[k]), format_g17(values[k])});
  };
  add_curve("observed", report.observed.grid, report.observed.values);
  if (!report.band_lower.empty()) {
    add_curve("band_lower", report.observed.grid, report.band_lower);
    add_curve("band_upper", report.observed.grid, report.band_upper);
  }
  for (std::size_t m = 0; m < report.replicates.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "replicate_%04zu", m);
    add_curve(name, report.replicates[m].grid, report.replicates[m].values);
  }
  write_csv(csv_path, table.header, table.rows);
}

CheckReport load_check_report(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open " + json_path);
  nlohmann::json j = nlohmann::json::parse(in);
  CheckReport report;
  report.statistic = j.at("statistic").get<std::string>();
  report.regime = j.at("regime").get<std::string>();
  report.landmark = j.at("landmark").get<double>();
  report.scope = j.value("scope", "pooled");
  report.mise = j.at("mise").get<double>();
  report.observed.grid = j.at("grid").get<std::vector<double>>();
  report.observed.values = j.at("observed").get<std::vector<double>>();
  report.observed.kind = j.value("observed_kind", "");
  report.band_lower = j.value("band_lower", std::vector<double>{});
  report.band_upper = j.value("band_upper", std::vector<double>{});
  report.skipped_times = j.value("skipped_times", std::vector<double>{});
  const std::string rep_kind = j.value("replicate_kind", "");
  for (const auto& values : j.at("replicates")) {
    Curve c;
    c.grid = report.observed.grid;
    c.values = values.get<std::vector<double>>();
    c.kind = rep_kind;
    report.replicates.push_back(std::move(c));
  }
  return report;
}

}  // namespace jmppc
