#include "jmppc/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jmppc {

double apply_time_transform(TimeTransform tr, double t) {
  if (tr == TimeTransform::identity) return t;
  return std::log(std::max(t, 1e-8));
}

BSplineBasis BSplineBasis::clamped(int degree, const std::vector<double>& interior_knots,
                                   double boundary_lo, double boundary_hi,
                                   bool include_intercept, TimeTransform transform) {
  if (degree < 0) throw std::runtime_error("spline degree must be >= 0");
  if (!(boundary_lo < boundary_hi)) throw std::runtime_error("boundary knots must be increasing");
  std::vector<double> interior = interior_knots;
  std::sort(interior.begin(), interior.end());
  for (double k : interior)
    if (k <= boundary_lo || k >= boundary_hi)
      throw std::runtime_error("interior knot outside boundary interval");
  BSplineBasis b;
  b.degree = degree;
  b.include_intercept = include_intercept;
  b.transform = transform;
  const int reps = degree + 1;
  b.knots.set_size(2 * reps + interior.size());
  arma::uword pos = 0;
  for (int i = 0; i < reps; ++i) b.knots(pos++) = boundary_lo;
  for (double k : interior) b.knots(pos++) = k;
  for (int i = 0; i < reps; ++i) b.knots(pos++) = boundary_hi;
  return b;
}

int BSplineBasis::n_basis() const {
  const int full = static_cast<int>(knots.n_elem) - degree - 1;
  return include_intercept ? full : full - 1;
}

double BSplineBasis::domain_lo() const { return knots(degree); }
double BSplineBasis::domain_hi() const { return knots(knots.n_elem - degree - 1); }

// nonzero basis functions and derivatives at u (The NURBS Book, A2.3)
static void ders_basis_funs(const arma::vec& U, int span, double u, int p, int n,
                            arma::mat& ders) {
  arma::mat ndu(p + 1, p + 1);
  arma::vec left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left(j) = u - U(span + 1 - j);
    right(j) = U(span + j) - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right(r + 1) + left(j - r);
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right(r + 1) * temp;
      saved = left(j - r) * temp;
    }
    ndu(j, j) = saved;
  }
  ders.zeros(n + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
  arma::mat a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double fac = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= fac;
    fac *= (p - k);
  }
}

arma::vec BSplineBasis::eval(double t, int deriv) const {
  if (deriv < 0) throw std::runtime_error("derivative order must be >= 0");
  if (deriv > 0 && transform != TimeTransform::identity)
    throw std::runtime_error("derivatives unsupported under a time transform");
  const double u = apply_time_transform(transform, t);
  const double lo = domain_lo(), hi = domain_hi();
  if (u < lo - 1e-12 || u > hi + 1e-12)
    throw std::runtime_error("spline evaluation outside knot range: t=" + std::to_string(t));
  const double uc = std::min(std::max(u, lo), hi);
  const int full = static_cast<int>(knots.n_elem) - degree - 1;
  // span index: knots(span) <= u < knots(span+1), last interval closed on the right
  int span;
  if (uc >= hi) {
    span = full - 1;
    while (span > degree && knots(span) == knots(span + 1)) --span;
  } else {
    span = degree;
    int hi_idx = full;
    while (span + 1 < hi_idx) {
      const int mid = (span + 1 + hi_idx) / 2;
      if (knots(mid) <= uc)
        span = mid;
      else
        hi_idx = mid;
    }
  }
  arma::mat ders;
  const int n = std::min(deriv, degree);
  ders_basis_funs(knots, span, uc, degree, n, ders);
  arma::vec out(full, arma::fill::zeros);
  if (deriv <= degree)
    for (int j = 0; j <= degree; ++j) out(span - degree + j) = ders(n, j);
  return include_intercept ? out : arma::vec(out.tail(full - 1));
}

arma::mat BSplineBasis::eval_matrix(const arma::vec& ts, int deriv) const {
  arma::mat m(ts.n_elem, n_basis());
  for (arma::uword i = 0; i < ts.n_elem; ++i) m.row(i) = eval(ts(i), deriv).t();
  return m;
}

NaturalSplineBasis NaturalSplineBasis::make(const std::vector<double>& internal_knots,
                                            double boundary_lo, double boundary_hi) {
  NaturalSplineBasis ns;
  ns.internal_knots = internal_knots;
  std::sort(ns.internal_knots.begin(), ns.internal_knots.end());
  ns.boundary_lo = boundary_lo;
  ns.boundary_hi = boundary_hi;
  ns.cubic = BSplineBasis::clamped(3, ns.internal_knots, boundary_lo, boundary_hi, true);
  const int m = ns.cubic.n_basis();  // internal + 4
  // second derivative rows at the two boundaries, intercept column dropped
  arma::mat con(2, m - 1);
  con.row(0) = ns.cubic.eval(boundary_lo, 2).tail(m - 1).t();
  con.row(1) = ns.cubic.eval(boundary_hi, 2).tail(m - 1).t();
  arma::mat Q, R;
  if (!arma::qr(Q, R, con.t()))
    throw std::runtime_error("QR of natural-spline constraint matrix failed");
  ns.constraint_null = Q.cols(2, m - 2);
  return ns;
}

arma::vec NaturalSplineBasis::eval(double t, int deriv) const {
  if (deriv < 0) throw std::runtime_error("derivative order must be >= 0");
  const int m = cubic.n_basis();
  auto inside = [&](double x, int d) -> arma::vec {
    return constraint_null.t() * cubic.eval(x, d).tail(m - 1);
  };
  if (t >= boundary_lo && t <= boundary_hi) return inside(t, deriv);
  // linear extrapolation beyond the boundary
  const double edge = (t < boundary_lo) ? boundary_lo : boundary_hi;
  if (deriv == 0) return inside(edge, 0) + (t - edge) * inside(edge, 1);
  if (deriv == 1) return inside(edge, 1);
  return arma::vec(n_basis(), arma::fill::zeros);
}

arma::mat NaturalSplineBasis::eval_matrix(const arma::vec& ts, int deriv) const {
  arma::mat m(ts.n_elem, n_basis());
  for (arma::uword i = 0; i < ts.n_elem; ++i) m.row(i) = eval(ts(i), deriv).t();
  return m;
}

std::vector<double> quantile_interior_knots(std::vector<double> values, int n_basis, int degree) {
  const int n_interior = n_basis - degree - 1;
  if (n_interior < 0) throw std::runtime_error("n_basis too small for degree");
  if (values.empty()) throw std::runtime_error("no values for knot placement");
  std::sort(values.begin(), values.end());
  std::vector<double> knots;
  double prev = values.front();
  for (int i = 1; i <= n_interior; ++i) {
    const double p = static_cast<double>(i) / (n_interior + 1);
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    double q = values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    if (q <= prev) q = prev + 1e-8;  // keep knots strictly increasing under ties
    knots.push_back(q);
    prev = q;
  }
  return knots;
}

}  // namespace jmppc
