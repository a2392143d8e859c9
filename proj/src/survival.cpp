#include "jmppc/survival.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jmppc {

static void check_state(const SubjectState& s) {
  if (!s.model || !s.subject || !s.theta) throw std::runtime_error("incomplete subject state");
  if (static_cast<int>(s.b.n_elem) != s.model->q())
    throw std::runtime_error("random-effect vector has wrong length for subject " +
                             s.subject->id);
}

double linear_predictor(const SubjectState& s, double t, int deriv) {
  check_state(s);
  return arma::dot(s.model->fixed().row(t, *s.subject, deriv), s.theta->beta) +
         arma::dot(s.model->random().row(t, *s.subject, deriv), s.b);
}

static double integral_of_lp(const SubjectState& s, double a, double b) {
  std::vector<double> cuts;
  for (double k : s.model->fixed().time_knots()) cuts.push_back(k);
  for (double k : s.model->random().time_knots()) cuts.push_back(k);
  return integrate_panels([&](double u) { return linear_predictor(s, u, 0); }, a, b, cuts,
                          *s.quad);
}

double functional_form_value(const SubjectState& s, double t) {
  check_state(s);
  const auto& ff = s.model->spec().functional_form;
  switch (ff.kind) {
    case FunctionalFormKind::value:
      return linear_predictor(s, t, 0);
    case FunctionalFormKind::slope:
      return linear_predictor(s, t, 1);
    case FunctionalFormKind::acceleration:
      return linear_predictor(s, t, 2);
    case FunctionalFormKind::windowed_average: {
      if (t <= 0) return linear_predictor(s, 0, 0);
      const double a = std::max(0.0, t - ff.window);
      return integral_of_lp(s, a, t) / (t - a);
    }
    case FunctionalFormKind::windowed_curvature: {
      if (t <= 0) return linear_predictor(s, 0, 2);
      const double a = std::max(0.0, t - ff.window);
      // integral of eta'' is a slope difference
      return (linear_predictor(s, t, 1) - linear_predictor(s, a, 1)) / (t - a);
    }
    case FunctionalFormKind::integral_average: {
      if (t <= 0) return linear_predictor(s, 0, 0);
      return integral_of_lp(s, 0, t) / t;
    }
  }
  throw std::runtime_error("unknown functional form");
}

static void integral_design_rows(const ModelEval& m, const SubjectRecord& subj, double a,
                                 double b, const QuadratureRule& quad, arma::vec& ix,
                                 arma::vec& iz) {
  ix.zeros(m.p());
  iz.zeros(m.q());
  std::vector<double> edges;
  edges.push_back(a);
  std::vector<double> cuts;
  for (double k : m.fixed().time_knots()) cuts.push_back(k);
  for (double k : m.random().time_knots()) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (c > a && c < b) edges.push_back(c);
  edges.push_back(b);
  arma::vec xr, zr;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]);
    const double half = 0.5 * (edges[p + 1] - edges[p]);
    if (half <= 0) continue;
    for (arma::uword qn = 0; qn < quad.nodes.n_elem; ++qn) {
      const double u = mid + half * quad.nodes(qn);
      m.fixed().row(u, subj, 0, xr);
      m.random().row(u, subj, 0, zr);
      ix += half * quad.weights(qn) * xr;
      iz += half * quad.weights(qn) * zr;
    }
  }
}

void assoc_design_row(const ModelEval& m, const SubjectRecord& subj, double t,
                      const QuadratureRule& quad, arma::vec& ax, arma::vec& az) {
  const auto& ff = m.spec().functional_form;
  switch (ff.kind) {
    case FunctionalFormKind::value:
      m.fixed().row(t, subj, 0, ax);
      m.random().row(t, subj, 0, az);
      return;
    case FunctionalFormKind::slope:
      m.fixed().row(t, subj, 1, ax);
      m.random().row(t, subj, 1, az);
      return;
    case FunctionalFormKind::acceleration:
      m.fixed().row(t, subj, 2, ax);
      m.random().row(t, subj, 2, az);
      return;
    case FunctionalFormKind::windowed_average: {
      if (t <= 0) {
        m.fixed().row(0, subj, 0, ax);
        m.random().row(0, subj, 0, az);
        return;
      }
      const double a = std::max(0.0, t - ff.window);
      integral_design_rows(m, subj, a, t, quad, ax, az);
      ax /= (t - a);
      az /= (t - a);
      return;
    }
    case FunctionalFormKind::windowed_curvature: {
      if (t <= 0) {
        m.fixed().row(0, subj, 2, ax);
        m.random().row(0, subj, 2, az);
        return;
      }
      const double a = std::max(0.0, t - ff.window);
      arma::vec xa, za;
      m.fixed().row(t, subj, 1, ax);
      m.random().row(t, subj, 1, az);
      m.fixed().row(a, subj, 1, xa);
      m.random().row(a, subj, 1, za);
      ax = (ax - xa) / (t - a);
      az = (az - za) / (t - a);
      return;
    }
    case FunctionalFormKind::integral_average: {
      if (t <= 0) {
        m.fixed().row(0, subj, 0, ax);
        m.random().row(0, subj, 0, az);
        return;
      }
      integral_design_rows(m, subj, 0, t, quad, ax, az);
      ax /= t;
      az /= t;
      return;
    }
  }
  throw std::runtime_error("unknown functional form");
}

double log_hazard(const SubjectState& s, double t) {
  check_state(s);
  const ModelEval& m = *s.model;
  double lh;
  if (m.spec().baseline_hazard.kind == BaselineHazardSpec::Kind::weibull)
    lh = m.log_h0_weibull(t);
  else
    lh = arma::dot(m.h0_basis_row(t), s.theta->gamma_h0);
  if (m.n_gamma() > 0) lh += arma::dot(m.survival_covariate_row(*s.subject), s.theta->gamma);
  lh += s.theta->alpha * functional_form_value(s, t);
  return lh;
}

double hazard(const SubjectState& s, double t) {
  const double h = std::exp(log_hazard(s, t));
  if (!std::isfinite(h))
    throw std::runtime_error("non-finite hazard for subject " + s.subject->id + " at t=" +
                             std::to_string(t));
  return h;
}

static std::vector<double> hazard_panel_cuts(const SubjectState& s) {
  std::vector<double> cuts = s.model->hazard_cuts();
  const auto& ff = s.model->spec().functional_form;
  if (ff.kind == FunctionalFormKind::windowed_average ||
      ff.kind == FunctionalFormKind::windowed_curvature) {
    // the moving window introduces kinks at knot + window and at t = window
    const std::size_t base = cuts.size();
    cuts.push_back(ff.window);
    for (std::size_t i = 0; i < base; ++i) cuts.push_back(cuts[i] + ff.window);
  }
  return cuts;
}

double cumulative_hazard(const SubjectState& s, double t0, double t1) {
  check_state(s);
  if (t0 < 0) throw std::runtime_error("cumulative hazard needs t0 >= 0");
  if (t1 < t0) throw std::runtime_error("cumulative hazard needs t1 >= t0");
  if (t1 == t0) return 0.0;
  const double H = integrate_panels([&](double u) { return hazard(s, u); }, t0, t1,
                                    hazard_panel_cuts(s), *s.quad);
  if (!std::isfinite(H))
    throw std::runtime_error("non-finite cumulative hazard for subject " + s.subject->id);
  return H;
}

double conditional_event_cdf(const SubjectState& s, double t_L, double t) {
  if (t < t_L) throw std::runtime_error("conditional cdf needs t >= t_L");
  return -std::expm1(-cumulative_hazard(s, t_L, t));
}

EventSimResult solve_event_time(const SubjectState& s, double t_L, double horizon,
                                double target_cumhaz) {
  check_state(s);
  if (horizon <= t_L) throw std::runtime_error("horizon must exceed t_L");
  if (!(target_cumhaz > 0)) throw std::runtime_error("target cumulative hazard must be positive");
  const double total = cumulative_hazard(s, t_L, horizon);
  if (total < target_cumhaz) return {horizon, false};

  // regula falsi with bisection fallback on g(T) = H(t_L, T) - target
  double lo = t_L, hi = horizon;
  double glo = -target_cumhaz, ghi = total - target_cumhaz;
  double x = hi;
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    double cand = lo - glo * (hi - lo) / (ghi - glo);
    const double width = hi - lo;
    if (!(cand > lo && cand < hi) || (it % 2 == 1))
      cand = 0.5 * (lo + hi);  // keep guaranteed progress
    const double g = cumulative_hazard(s, t_L, cand) - target_cumhaz;
    if (g <= 0) {
      lo = cand;
      glo = g;
    } else {
      hi = cand;
      ghi = g;
    }
    x = 0.5 * (lo + hi);
    if (hi - lo >= width) break;
  }
  return {x, true};
}

EventSimResult simulate_event_time(const SubjectState& s, double t_L, double horizon,
                                   RngStream& rng) {
  return solve_event_time(s, t_L, horizon, rng.exponential());
}

}  // namespace jmppc
