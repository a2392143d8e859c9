#include "jmppc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jmppc {

QuadratureRule QuadratureRule::gauss_legendre(int order) {
  if (order < 1) throw std::runtime_error("quadrature order must be >= 1");
  QuadratureRule r;
  r.order = order;
  r.nodes.set_size(order);
  r.weights.set_size(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n starting from the Chebyshev-like estimate
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes(i) = -x;
    r.nodes(n - 1 - i) = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.weights(i) = w;
    r.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) r.nodes((n - 1) / 2) = 0.0;
  return r;
}

const QuadratureRule& QuadratureRule::legendre15() {
  static const QuadratureRule r = gauss_legendre(15);
  return r;
}

double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& cuts, const QuadratureRule& rule) {
  if (b < a) throw std::runtime_error("integration range reversed");
  if (a == b) return 0.0;
  std::vector<double> edges;
  edges.push_back(a);
  for (double c : cuts)
    if (c > a && c < b) edges.push_back(c);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double total = 0;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double lo = edges[p], hi = edges[p + 1];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double s = 0;
    for (arma::uword q = 0; q < rule.nodes.n_elem; ++q)
      s += rule.weights(q) * f(mid + half * rule.nodes(q));
    total += half * s;
  }
  return total;
}

}  // namespace jmppc
