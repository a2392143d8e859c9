#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jmppc {

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::runtime_error("mean of empty vector");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) throw std::runtime_error("sd needs at least 2 values");
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// type-7 sample quantile (linear interpolation between order statistics)
inline double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) throw std::runtime_error("quantile of empty vector");
  if (p < 0 || p > 1) throw std::runtime_error("quantile probability outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::runtime_error("correlation needs two equal-length vectors, n >= 3");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::runtime_error("correlation undefined: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

// midranks, for rank correlations
inline std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
    i = j + 1;
  }
  return r;
}

inline double spearman_corr(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_corr(ranks_of(x), ranks_of(y));
}

}  // namespace jmppc
