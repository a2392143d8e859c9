#pragma once

#include <cstdint>
#include <random>

#include <armadillo>

namespace jmppc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded random stream. Work units (subject, replicate, chain, fold) draw from
// streams derived from the master seed, so results do not depend on thread
// scheduling or on how many workers run.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  static RngStream derive(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(master + 0x1000000001b3ULL);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return RngStream(s);
  }

  double uniform() { return unif_(eng_); }
  double normal() { return norm_(eng_); }
  double exponential() { return -std::log1p(-uniform()); }
  bool bernoulli(double p) { return uniform() < p; }

  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(eng_);
  }

  double chi_squared(double df) {
    std::gamma_distribution<double> g(df / 2.0, 2.0);
    return g(eng_);
  }

  arma::vec normal_vec(arma::uword n) {
    arma::vec v(n);
    for (arma::uword i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace jmppc
