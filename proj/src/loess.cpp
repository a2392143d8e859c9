#include "jmppc/loess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace jmppc {

LoessFit::LoessFit(const std::vector<double>& x, const std::vector<double>& y,
                   LoessConfig config)
    : cfg_(config) {
  if (x.size() != y.size()) throw std::runtime_error("loess: x/y length mismatch");
  if (x.empty()) throw std::runtime_error("loess: empty data");
  if (!(cfg_.span > 0 && cfg_.span <= 1)) throw std::runtime_error("loess: span must be in (0,1]");
  if (cfg_.degree < 0 || cfg_.degree > 2) throw std::runtime_error("loess: degree must be 0..2");
  const double needed = cfg_.degree + 1;
  if (cfg_.span * static_cast<double>(x.size()) < needed)
    throw std::runtime_error("loess: span window smaller than degree + 1 points");

  order_.resize(x.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  x_.reserve(x.size());
  y_.reserve(y.size());
  for (std::size_t i : order_) {
    x_.push_back(x[i]);
    y_.push_back(y[i]);
  }
  if (x_.front() == x_.back())
    throw std::runtime_error("loess: degenerate predictor, all x equal");
  window_ = std::max<std::size_t>(
      static_cast<std::size_t>(std::floor(cfg_.span * static_cast<double>(x_.size()))),
      static_cast<std::size_t>(cfg_.degree) + 1);
  window_ = std::min(window_, x_.size());
  robust_w_.assign(x_.size(), 1.0);

  for (int pass = 0; pass < cfg_.robustness_iterations; ++pass) {
    std::vector<double> resid(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i)
      resid[i] = std::abs(y_[i] - fit_at(x_[i], true).value);
    std::vector<double> tmp = resid;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    const double s = tmp[tmp.size() / 2];
    if (s <= 0) break;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double u = resid[i] / (6.0 * s);
      robust_w_[i] = (u < 1.0) ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
    }
  }
}

LoessFit::Local LoessFit::fit_at(double x0, bool at_training_point) const {
  const std::size_t n = x_.size();
  // contiguous rank window of the `window_` nearest points
  std::size_t lo = std::lower_bound(x_.begin(), x_.end(), x0) - x_.begin();
  std::size_t hi = lo;  // half-open [lo, hi)
  while (hi - lo < window_) {
    if (lo == 0) {
      ++hi;
    } else if (hi == n) {
      --lo;
    } else if (x0 - x_[lo - 1] <= x_[hi] - x0) {
      --lo;
    } else {
      ++hi;
    }
  }
  double dmax = std::max(x0 - x_[lo], x_[hi - 1] - x0);
  dmax = std::max(dmax, 0.0);
  const double h = dmax > 0 ? dmax : 1.0;  // predictor scale, keeps moments conditioned

  double s[5] = {0, 0, 0, 0, 0};
  double t[3] = {0, 0, 0};
  double wsum = 0;
  auto accumulate = [&](bool uniform) {
    for (int k = 0; k < 5; ++k) s[k] = 0;
    for (int k = 0; k < 3; ++k) t[k] = 0;
    wsum = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      double w = robust_w_[i];
      if (!uniform) {
        const double d = std::abs(x_[i] - x0);
        if (dmax > 0) {
          const double z = d / dmax;
          if (z >= 1.0) continue;
          const double c = 1.0 - z * z * z;
          w *= c * c * c;
        }
      }
      if (w <= 0) continue;
      const double u = (x_[i] - x0) / h;
      double up = w;
      for (int k = 0; k < 5; ++k) {
        s[k] += up;
        if (k < 3) t[k] += up * y_[i];
        up *= u;
      }
      wsum += w;
    }
  };
  accumulate(false);
  if (wsum <= 0) accumulate(true);
  if (wsum <= 0) throw std::runtime_error("loess: zero total weight in window");

  for (int deg = cfg_.degree; deg >= 0; --deg) {
    const int m = deg + 1;
    // augmented moment system [M | t | e0]; the intercept is scale-invariant
    double A[3][5] = {};
    for (int a = 0; a < m; ++a) {
      for (int c = 0; c < m; ++c) A[a][c] = s[a + c];
      A[a][m] = t[a];
      A[a][m + 1] = a == 0 ? 1.0 : 0.0;
    }
    bool singular = false;
    for (int col = 0; col < m && !singular; ++col) {
      int p = col;
      for (int r = col + 1; r < m; ++r)
        if (std::abs(A[r][col]) > std::abs(A[p][col])) p = r;
      if (std::abs(A[p][col]) <= 1e-10 * wsum) {
        singular = true;  // rank-deficient window: drop the degree
        break;
      }
      if (p != col)
        for (int c = col; c < m + 2; ++c) std::swap(A[p][c], A[col][c]);
      for (int r = col + 1; r < m; ++r) {
        const double f = A[r][col] / A[col][col];
        for (int c = col; c < m + 2; ++c) A[r][c] -= f * A[col][c];
      }
    }
    if (singular) continue;
    double sol[3] = {}, inv0[3] = {};
    for (int r = m - 1; r >= 0; --r) {
      double v = A[r][m], w0 = A[r][m + 1];
      for (int c = r + 1; c < m; ++c) {
        v -= A[r][c] * sol[c];
        w0 -= A[r][c] * inv0[c];
      }
      sol[r] = v / A[r][r];
      inv0[r] = w0 / A[r][r];
    }
    if (!std::isfinite(sol[0])) continue;
    Local out;
    out.value = sol[0];
    if (at_training_point) out.self_weight = inv0[0];
    return out;
  }
  // all singular: weighted mean
  Local out;
  out.value = t[0] / s[0];
  if (at_training_point) out.self_weight = 1.0 / s[0];
  return out;
}

void LoessFit::training_fit(std::vector<double>& fitted, double& df) const {
  fitted.resize(x_.size());
  double tr = 0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const Local loc = fit_at(x_[i], true);
    fitted[order_[i]] = loc.value;
    tr += robust_w_[i] * loc.self_weight;
  }
  df_ = tr;
  df = tr;
}

double LoessFit::predict(double x0) const { return fit_at(x0, false).value; }

std::vector<double> LoessFit::predict(const std::vector<double>& grid) const {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = predict(grid[i]);
  return out;
}

double LoessFit::effective_df() const {
  if (df_ >= 0) return df_;
  double tr = 0;
  for (std::size_t i = 0; i < x_.size(); ++i)
    tr += robust_w_[i] * fit_at(x_[i], true).self_weight;
  df_ = tr;
  return df_;
}

}  // namespace jmppc
