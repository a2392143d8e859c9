#include "jmppc/ranef.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "jmppc/survival.hpp"

namespace jmppc {

arma::vec sample_prior_random_effects(const arma::mat& D, RngStream& rng) {
  arma::mat L;
  if (!arma::chol(L, arma::symmatu(D), "lower"))
    throw std::runtime_error("D not positive definite");
  return L * rng.normal_vec(D.n_rows);
}

ConditionalTarget::ConditionalTarget(const ModelEval& model, const SubjectRecord& subject,
                                     double t_L, int delta, const ParameterDraw& theta,
                                     const QuadratureRule& quad) {
  if (t_L < 0) throw std::runtime_error("t_L must be nonnegative");
  if (delta != 0 && delta != 1) throw std::runtime_error("delta must be 0 or 1");
  if (delta == 1 && t_L <= 0) throw std::runtime_error("event at t_L = 0 is not supported");

  alpha_ = theta.alpha;
  sigma2_ = theta.sigma * theta.sigma;

  // measurements up to and including t_L
  std::vector<double> use_t, use_y;
  for (std::size_t k = 0; k < subject.times.size(); ++k)
    if (subject.times[k] <= t_L) {
      use_t.push_back(subject.times[k]);
      use_y.push_back(subject.values[k]);
    }
  const int n = static_cast<int>(use_t.size());
  Z_.set_size(n, model.q());
  y_resid_fixed_.set_size(n);
  arma::vec xr, zr;
  for (int k = 0; k < n; ++k) {
    model.fixed().row(use_t[k], subject, 0, xr);
    model.random().row(use_t[k], subject, 0, zr);
    y_resid_fixed_(k) = use_y[k] - arma::dot(xr, theta.beta);
    Z_.row(k) = zr.t();
  }

  // survival factor exp(-H(0, t_L)) on quadrature nodes, plus the optional
  // event-density factor h(t_L)^delta
  const double wgam =
      model.n_gamma() > 0
          ? arma::dot(model.survival_covariate_row(subject), theta.gamma)
          : 0.0;
  auto node_constant = [&](double u, arma::vec& az_out) {
    arma::vec ax;
    assoc_design_row(model, subject, u, quad, ax, az_out);
    const double lh0 = model.spec().baseline_hazard.kind == BaselineHazardSpec::Kind::weibull
                           ? model.log_h0_weibull(u)
                           : arma::dot(model.h0_basis_row(u), theta.gamma_h0);
    return lh0 + wgam + alpha_ * arma::dot(ax, theta.beta);
  };

  if (t_L > 0) {
    std::vector<double> edges;
    edges.push_back(0.0);
    std::vector<double> cuts = model.hazard_cuts();
    const auto& ff = model.spec().functional_form;
    if (ff.kind == FunctionalFormKind::windowed_average ||
        ff.kind == FunctionalFormKind::windowed_curvature) {
      const std::size_t base = cuts.size();
      cuts.push_back(ff.window);
      for (std::size_t i = 0; i < base; ++i) cuts.push_back(cuts[i] + ff.window);
    }
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts)
      if (c > 0 && c < t_L) edges.push_back(c);
    edges.push_back(t_L);
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    const std::size_t n_nodes = (edges.size() - 1) * quad.nodes.n_elem;
    quad_w_.set_size(n_nodes);
    quad_c_.set_size(n_nodes);
    quad_AZ_.set_size(n_nodes, model.q());
    std::size_t pos = 0;
    arma::vec az;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double mid = 0.5 * (edges[p] + edges[p + 1]);
      const double half = 0.5 * (edges[p + 1] - edges[p]);
      for (arma::uword qn = 0; qn < quad.nodes.n_elem; ++qn) {
        const double u = mid + half * quad.nodes(qn);
        quad_w_(pos) = half * quad.weights(qn);
        quad_c_(pos) = node_constant(u, az);
        quad_AZ_.row(pos) = az.t();
        ++pos;
      }
    }
  } else {
    quad_w_.set_size(0);
    quad_c_.set_size(0);
    quad_AZ_.set_size(0, model.q());
  }

  has_event_ = delta == 1;
  if (has_event_) {
    arma::vec az;
    event_c_ = node_constant(t_L, az);
    event_az_ = az.t();
  }

  if (!arma::chol(prior_chol_, arma::symmatu(theta.D), "lower"))
    throw std::runtime_error("D not positive definite");
  prior_logdet_ = arma::sum(arma::log(prior_chol_.diag()));
}

double ConditionalTarget::log_density(const arma::vec& b) const {
  static const double log2pi = std::log(2.0 * M_PI);
  double ld = 0;
  if (y_resid_fixed_.n_elem > 0) {
    const arma::vec r = y_resid_fixed_ - Z_ * b;
    ld += -0.5 * static_cast<double>(r.n_elem) * (log2pi + std::log(sigma2_)) -
          0.5 * arma::dot(r, r) / sigma2_;
  }
  if (quad_w_.n_elem > 0)
    ld -= arma::dot(quad_w_, arma::exp(quad_c_ + alpha_ * (quad_AZ_ * b)));
  if (has_event_) ld += event_c_ + alpha_ * arma::dot(event_az_, b);
  const arma::vec z = arma::solve(arma::trimatl(prior_chol_), b);
  ld += -0.5 * arma::dot(z, z) - prior_logdet_ -
        0.5 * static_cast<double>(b.n_elem) * log2pi;
  return ld;
}

double log_conditional_target(const ModelEval& model, const SubjectRecord& subject, double t_L,
                              int delta, const ParameterDraw& theta, const arma::vec& b) {
  return ConditionalTarget(model, subject, t_L, delta, theta).log_density(b);
}

static double robbins_monro(double scale, bool accepted, int it, double target) {
  const double step_length = scale / (target * (1.0 - target));
  if (accepted) return scale + step_length * (1.0 - target) / it;
  return scale - step_length * target / it;
}

MHResult mh_sample_conditional(const ModelEval& model, const SubjectRecord& subject, double t_L,
                               int delta, const ParameterDraw& theta, const MHConfig& config,
                               RngStream& rng) {
  if (config.n_iterations <= 0) throw std::runtime_error("n_iterations must be positive");
  if (config.burn_in < 0 || config.burn_in >= config.n_iterations)
    throw std::runtime_error("burn-in must be shorter than the chain");
  if (config.thinning < 1) throw std::runtime_error("thinning must be >= 1");
  if (!(config.proposal_scale > 0)) throw std::runtime_error("proposal_scale must be positive");
  if (!(config.target_acceptance > 0 && config.target_acceptance < 1))
    throw std::runtime_error("target_acceptance must lie in (0,1)");

  const ConditionalTarget target(model, subject, t_L, delta, theta);
  const int q = target.q();
  const arma::mat L = target.prior_chol() * (2.38 / std::sqrt(static_cast<double>(q)));

  arma::vec b(q, arma::fill::zeros);
  double ld = target.log_density(b);
  double scale = config.proposal_scale;

  const int n_kept = (config.n_iterations - config.burn_in) / config.thinning;
  MHResult res;
  res.draws.set_size(q, std::max(n_kept, 0));

  int kept = 0, accepted_burn = 0, accepted_post = 0, post_total = 0;
  for (int it = 1; it <= config.n_iterations; ++it) {
    const arma::vec prop = b + scale * (L * rng.normal_vec(q));
    const double ldp = target.log_density(prop);
    bool accept = false;
    if (std::isfinite(ldp)) {
      if (!std::isfinite(ld) || std::log(rng.uniform() + 1e-300) < ldp - ld) accept = true;
    }
    if (accept) {
      b = prop;
      ld = ldp;
    }
    if (it <= config.burn_in) {
      accepted_burn += accept;
      if (config.adapt && it > 19)
        scale = std::max(robbins_monro(scale, accept, it, config.target_acceptance), 1e-8);
    } else {
      ++post_total;
      accepted_post += accept;
      if ((it - config.burn_in) % config.thinning == 0 && kept < n_kept)
        res.draws.col(kept++) = b;
    }
  }
  if (config.burn_in > 0 && accepted_burn == 0)
    throw std::runtime_error(
        "no proposals accepted during burn-in for subject " + subject.id +
        "; adjust proposal_scale");
  res.draws.resize(q, kept);
  res.acceptance_rate = post_total > 0 ? static_cast<double>(accepted_post) / post_total : 0.0;
  res.final_scale = scale;
  return res;
}

}  // namespace jmppc
