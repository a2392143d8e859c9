#include "jmppc/draws.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "jmppc/csv.hpp"

namespace jmppc {

void validate_draws(const PosteriorDraws& draws, const ModelEval& model) {
  if (draws.draws.empty()) throw std::runtime_error("no posterior draws");
  const int p = model.p(), q = model.q(), g = model.n_gamma(), P = model.n_gh0();
  for (std::size_t k = 0; k < draws.draws.size(); ++k) {
    const auto& d = draws.draws[k];
    const std::string at = "draw " + std::to_string(k + 1);
    if (static_cast<int>(d.beta.n_elem) != p) throw std::runtime_error(at + ": beta length mismatch");
    if (static_cast<int>(d.gamma.n_elem) != g)
      throw std::runtime_error(at + ": gamma length mismatch");
    if (static_cast<int>(d.gamma_h0.n_elem) != P)
      throw std::runtime_error(at + ": gh0 length mismatch");
    if (!(d.sigma > 0) || !std::isfinite(d.sigma))
      throw std::runtime_error(at + ": sigma must be positive");
    if (P > 0 && (!(d.tau > 0) || !std::isfinite(d.tau)))
      throw std::runtime_error(at + ": tau must be positive");
    if (static_cast<int>(d.D.n_rows) != q || static_cast<int>(d.D.n_cols) != q)
      throw std::runtime_error(at + ": D dimension mismatch");
    if (arma::norm(d.D - d.D.t(), "inf") > 1e-8 * (1.0 + arma::norm(d.D, "inf")))
      throw std::runtime_error(at + ": D not symmetric");
    arma::mat L;
    if (!arma::chol(L, arma::symmatu(d.D), "lower"))
      throw std::runtime_error(at + ": D not positive definite");
  }
  if (draws.has_b()) {
    if (draws.b.size() != draws.draws.size())
      throw std::runtime_error("random-effect draws not aligned with parameter draws");
    for (std::size_t k = 0; k < draws.b.size(); ++k)
      if (static_cast<int>(draws.b[k].n_rows) != q ||
          draws.b[k].n_cols != draws.b_subject_ids.size())
        throw std::runtime_error("draw " + std::to_string(k + 1) +
                                 ": random-effect matrix dimension mismatch");
  }
}

void save_draws(const PosteriorDraws& draws, const std::string& theta_path,
                const std::string& b_path) {
  if (draws.draws.empty()) throw std::runtime_error("no draws to save");
  const auto& d0 = draws.draws.front();
  const int p = d0.beta.n_elem, g = d0.gamma.n_elem, P = d0.gamma_h0.n_elem, q = d0.D.n_rows;

  std::vector<std::string> header;
  for (int i = 1; i <= p; ++i) header.push_back("beta." + std::to_string(i));
  header.push_back("sigma");
  for (int i = 1; i <= g; ++i) header.push_back("gamma." + std::to_string(i));
  header.push_back("alpha.1");
  for (int i = 1; i <= P; ++i) header.push_back("gh0." + std::to_string(i));
  for (int i = 1; i <= q; ++i)
    for (int j = i; j <= q; ++j)
      header.push_back("D." + std::to_string(i) + "." + std::to_string(j));
  if (P > 0) header.push_back("tau");

  std::vector<std::vector<std::string>> rows;
  for (const auto& d : draws.draws) {
    std::vector<std::string> r;
    for (int i = 0; i < p; ++i) r.push_back(format_g17(d.beta(i)));
    r.push_back(format_g17(d.sigma));
    for (int i = 0; i < g; ++i) r.push_back(format_g17(d.gamma(i)));
    r.push_back(format_g17(d.alpha));
    for (int i = 0; i < P; ++i) r.push_back(format_g17(d.gamma_h0(i)));
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j) r.push_back(format_g17(d.D(i, j)));
    if (P > 0) r.push_back(format_g17(d.tau));
    rows.push_back(std::move(r));
  }
  write_csv(theta_path, header, rows);

  if (!b_path.empty() && draws.has_b()) {
    std::vector<std::string> bh = {"draw", "subject"};
    for (int i = 1; i <= q; ++i) bh.push_back("b." + std::to_string(i));
    std::vector<std::vector<std::string>> brows;
    for (std::size_t k = 0; k < draws.b.size(); ++k)
      for (std::size_t s = 0; s < draws.b_subject_ids.size(); ++s) {
        std::vector<std::string> r = {std::to_string(k + 1), draws.b_subject_ids[s]};
        for (int i = 0; i < q; ++i) r.push_back(format_g17(draws.b[k](i, s)));
        brows.push_back(std::move(r));
      }
    write_csv(b_path, bh, brows);
  }
}

PosteriorDraws load_posterior_draws(const ModelEval& model, const std::string& theta_path,
                                    const std::string& b_path) {
  const CsvTable t = read_csv(theta_path);
  const int p = model.p(), q = model.q(), g = model.n_gamma(), P = model.n_gh0();

  auto need = [&](const std::string& name) {
    const int c = t.col(name);
    if (c < 0) throw std::runtime_error(theta_path + ": missing column " + name);
    return c;
  };

  std::vector<int> cbeta, cgamma, cgh0, cD;
  for (int i = 1; i <= p; ++i) cbeta.push_back(need("beta." + std::to_string(i)));
  const int csigma = need("sigma");
  for (int i = 1; i <= g; ++i) cgamma.push_back(need("gamma." + std::to_string(i)));
  const int calpha = need("alpha.1");
  for (int i = 1; i <= P; ++i) cgh0.push_back(need("gh0." + std::to_string(i)));
  for (int i = 1; i <= q; ++i)
    for (int j = i; j <= q; ++j) cD.push_back(need("D." + std::to_string(i) + "." + std::to_string(j)));
  const int ctau = (P > 0) ? need("tau") : -1;

  PosteriorDraws out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string at = theta_path + " row " + std::to_string(r + 1);
    ParameterDraw d;
    d.beta.set_size(p);
    for (int i = 0; i < p; ++i) d.beta(i) = parse_double(row[cbeta[i]], at);
    d.sigma = parse_double(row[csigma], at);
    d.gamma.set_size(g);
    for (int i = 0; i < g; ++i) d.gamma(i) = parse_double(row[cgamma[i]], at);
    d.alpha = parse_double(row[calpha], at);
    d.gamma_h0.set_size(P);
    for (int i = 0; i < P; ++i) d.gamma_h0(i) = parse_double(row[cgh0[i]], at);
    d.D.set_size(q, q);
    int pos = 0;
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j) {
        d.D(i, j) = parse_double(row[cD[pos]], at);
        d.D(j, i) = d.D(i, j);
        ++pos;
      }
    d.tau = (ctau >= 0) ? parse_double(row[ctau], at) : 0.0;
    out.draws.push_back(std::move(d));
  }

  if (!b_path.empty()) {
    const CsvTable bt = read_csv(b_path);
    const int cdraw = bt.col("draw"), csubj = bt.col("subject");
    if (cdraw < 0 || csubj < 0)
      throw std::runtime_error(b_path + ": need columns draw,subject");
    std::vector<int> cb;
    for (int i = 1; i <= q; ++i) {
      const int c = bt.col("b." + std::to_string(i));
      if (c < 0) throw std::runtime_error(b_path + ": missing column b." + std::to_string(i));
      cb.push_back(c);
    }
    std::map<std::string, std::size_t> subject_pos;
    for (const auto& row : bt.rows)
      if (!subject_pos.count(row[csubj])) {
        const std::size_t k = subject_pos.size();
        subject_pos[row[csubj]] = k;
        out.b_subject_ids.push_back(row[csubj]);
      }
    out.b.assign(out.draws.size(), arma::mat(q, subject_pos.size(), arma::fill::value(arma::datum::nan)));
    for (const auto& row : bt.rows) {
      const long k = parse_long(row[cdraw], b_path) - 1;
      if (k < 0 || k >= static_cast<long>(out.draws.size()))
        throw std::runtime_error(b_path + ": draw index out of range");
      const std::size_t s = subject_pos.at(row[csubj]);
      for (int i = 0; i < q; ++i) out.b[k](i, s) = parse_double(row[cb[i]], b_path);
    }
    for (std::size_t k = 0; k < out.b.size(); ++k)
      if (out.b[k].has_nan())
        throw std::runtime_error(b_path + ": incomplete random effects for draw " +
                                 std::to_string(k + 1));
  }

  validate_draws(out, model);
  return out;
}

}  // namespace jmppc
