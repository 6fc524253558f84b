#include "kondo/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kondo {

std::vector<double> bandit_policy(const BanditSpec& spec) {
  if (spec.K < 2) throw std::invalid_argument("bandit needs at least 2 arms");
  if (!(spec.p > 0.0 && spec.p < 1.0)) throw std::invalid_argument("bandit p must be in (0, 1)");
  if (spec.correct >= spec.K) throw std::invalid_argument("correct arm out of range");
  std::vector<double> pi(spec.K, (1.0 - spec.p) / static_cast<double>(spec.K - 1));
  pi[spec.correct] = spec.p;
  return pi;
}

std::vector<double> score_vector(const std::vector<double>& pi, std::size_t a) {
  std::vector<double> phi(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) phi[j] = (j == a ? 1.0 : 0.0) - pi[j];
  return phi;
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

double cosine(const std::vector<double>& x, const std::vector<double>& y) { return dot(x, y) / (norm(x) * norm(y)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Squared norm of the component of v orthogonal to unit direction u.
double perp_sq(const std::vector<double>& v, const std::vector<double>& u) {
  const double along = dot(v, u);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] - along * u[i];
    s += r * r;
  }
  return s;
}

std::vector<double> unit(std::vector<double> v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

// Var_perp of an estimator taking value g[a] with probability pi[a].
double var_perp(const std::vector<std::vector<double>>& g, const std::vector<double>& pi,
                const std::vector<double>& direction) {
  const auto u = unit(direction);
  std::vector<double> mean(pi.size(), 0.0);
  for (std::size_t a = 0; a < pi.size(); ++a)
    for (std::size_t j = 0; j < pi.size(); ++j) mean[j] += pi[a] * g[a][j];
  double v = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    std::vector<double> d(pi.size());
    for (std::size_t j = 0; j < pi.size(); ++j) d[j] = g[a][j] - mean[j];
    v += pi[a] * perp_sq(d, u);
  }
  return v;
}

}  // namespace

GeometryReport geometry(const BanditSpec& spec) {
  if (spec.K < 3) throw std::invalid_argument("geometry needs K >= 3");
  const auto pi = bandit_policy(spec);
  const double K = static_cast<double>(spec.K);
  const double p = spec.p;
  const double b = spec.b;
  const std::size_t ys = spec.correct;
  const std::size_t other = ys == 0 ? 1 : 0;

  GeometryReport r;
  const auto phi_star = score_vector(pi, ys);
  const auto phi_a = score_vector(pi, other);
  r.phi_star_sq = dot(phi_star, phi_star);
  r.phi_star_sq_closed = (1.0 - p) * (1.0 - p) * K / (K - 1.0);
  r.inner = dot(phi_a, phi_star);
  r.inner_closed = -p * (1.0 - p) * K / (K - 1.0);

  r.grad_J.resize(spec.K);
  for (std::size_t j = 0; j < spec.K; ++j) r.grad_J[j] = p * phi_star[j];
  r.cos_incorrect = cosine(phi_a, r.grad_J);
  const double pa = (1.0 - p) / (K - 1.0);
  const double pi_sq = p * p + (1.0 - p) * (1.0 - p) / (K - 1.0);
  const double phi_a_sq = 1.0 - 2.0 * pa + pi_sq;
  r.cos_incorrect_closed = -p * std::sqrt(K / (K - 1.0)) / std::sqrt(phi_a_sq);

  // Per-sample estimators indexed by the drawn arm.
  std::vector<std::vector<double>> g_pg(spec.K), g_kg(spec.K);
  for (std::size_t a = 0; a < spec.K; ++a) {
    const double reward = a == ys ? 1.0 : 0.0;
    const double u = reward - b;
    const double chi = u * -std::log(pi[a]);
    const auto phi = score_vector(pi, a);
    g_pg[a].resize(spec.K);
    g_kg[a].assign(spec.K, 0.0);
    for (std::size_t j = 0; j < spec.K; ++j) g_pg[a][j] = u * phi[j];
    if (chi > 0.0) {
      g_kg[a] = g_pg[a];
      r.expected_backward_kg += pi[a];
    }
  }
  r.expected_backward_pg = 1.0;
  r.mean_pg.assign(spec.K, 0.0);
  r.mean_kg.assign(spec.K, 0.0);
  for (std::size_t a = 0; a < spec.K; ++a) {
    for (std::size_t j = 0; j < spec.K; ++j) {
      r.mean_pg[j] += pi[a] * g_pg[a][j];
      r.mean_kg[j] += pi[a] * g_kg[a][j];
    }
  }
  r.var_perp_pg = var_perp(g_pg, pi, r.grad_J);
  r.var_perp_kg = var_perp(g_kg, pi, r.grad_J);
  const double c = phi_a_sq - p * p * K / (K - 1.0);
  r.var_perp_pg_closed = (1.0 - p) * b * b * c;
  return r;
}

ParetoReport pareto_check(const BanditSpec& spec, std::size_t B) {
  if (!(spec.b > 0.0 && spec.b < 1.0)) throw std::invalid_argument("pareto_check needs b in (0, 1)");
  const auto g = geometry(spec);
  ParetoReport r;
  r.cos_mean_kg = cosine(g.mean_kg, g.grad_J);
  r.var_perp_kg = g.var_perp_kg;
  r.var_perp_pg = g.var_perp_pg;
  r.expected_backward = g.expected_backward_kg * static_cast<double>(B);
  r.pB = spec.p * static_cast<double>(B);
  r.keep_failure = std::pow(1.0 - spec.p, static_cast<double>(B));

  // Any batch with at least one keep sums k copies of the kept vector; the
  // kept vector is the same for every keep, so check k = 1.
  const auto pi = bandit_policy(spec);
  const auto phi_star = score_vector(pi, spec.correct);
  std::vector<double> kept(spec.K);
  for (std::size_t j = 0; j < spec.K; ++j) kept[j] = (1.0 - spec.b) * phi_star[j];
  r.kg_batch_cos_given_keep = cosine(kept, g.grad_J);

  r.pass = std::abs(r.cos_mean_kg - 1.0) <= 1e-12 && r.var_perp_kg <= kNumericalZero &&
           std::abs(r.expected_backward - r.pB) <= 1e-9 * std::max(1.0, r.pB) &&
           std::abs(r.kg_batch_cos_given_keep - 1.0) <= 1e-12;
  return r;
}

double alpha_star(double p, std::size_t K) {
  if (!(p > 0.0 && p < 1.0) || K < 2) throw std::invalid_argument("alpha_star needs p in (0,1), K >= 2");
  const double L = std::log(p * static_cast<double>(K - 1) / (1.0 - p));
  return L > 0.0 ? L / (1.0 + L) : 0.0;
}

double separation_boundary(double p, std::size_t K, double tol) {
  const auto pi = bandit_policy({.K = K, .correct = 0, .p = p, .b = p});
  const double u_c = 1.0 - p, l_c = -std::log(pi[0]);
  const double u_i = -p, l_i = -std::log(pi[1]);
  auto gap = [&](double alpha) {
    return (alpha * u_c + (1.0 - alpha) * l_c) - (alpha * u_i + (1.0 - alpha) * l_i);
  };
  if (gap(0.0) > 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

GamblingReport gambling_check(double mu_star, double delta, double sigma, double eps, std::size_t n_draws,
                              Rng& rng) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("gambling_check needs eps in (0, 1)");
  if (!(delta > 0.0) || sigma < 0.0) throw std::invalid_argument("gambling_check needs delta > 0, sigma >= 0");
  if (n_draws == 0) throw std::invalid_argument("gambling_check needs draws");
  GamblingReport r;
  r.amplification = std::log(1.0 / eps);
  const double baseline = mu_star - eps * delta;
  if (sigma == 0.0) {
    r.closed_form = 0.0;
    r.tail_bound = 0.0;
    r.probability = 0.0;
    r.within_3se = true;
    return r;
  }
  const double z = (1.0 - eps) * delta / sigma;
  r.closed_form = 1.0 - normal_cdf(z);
  r.tail_bound = std::exp(-z * z / 2.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double reward = mu_star - delta + sigma * rng.normal();
    if (reward - baseline > 0.0) ++hits;
  }
  const double n = static_cast<double>(n_draws);
  r.probability = static_cast<double>(hits) / n;
  r.standard_error = std::sqrt(r.probability * (1.0 - r.probability) / n);
  const double se = std::max(r.standard_error, std::sqrt(r.closed_form * (1.0 - r.closed_form) / n));
  r.within_3se = std::abs(r.probability - r.closed_form) <= 3.0 * se;
  return r;
}

BatchCosineReport batch_cosine_mc(const BanditSpec& spec, std::size_t B, std::size_t n_batches, Rng& rng) {
  const auto pi = bandit_policy(spec);
  const auto grad_J = score_vector(pi, spec.correct);  // direction only
  BatchCosineReport r;
  r.p_sqrt_B = spec.p * std::sqrt(static_cast<double>(B));
  r.min_cos_kg = 1.0;
  std::size_t with_keep = 0;
  std::vector<double> counts(spec.K);
  std::vector<double> pg(spec.K), kg(spec.K);
  for (std::size_t n = 0; n < n_batches; ++n) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t t = 0; t < B; ++t) counts[rng.categorical(pi)] += 1.0;
    std::fill(pg.begin(), pg.end(), 0.0);
    std::fill(kg.begin(), kg.end(), 0.0);
    for (std::size_t a = 0; a < spec.K; ++a) {
      if (counts[a] == 0.0) continue;
      const double u = (a == spec.correct ? 1.0 : 0.0) - spec.b;
      const bool keep = u * -std::log(pi[a]) > 0.0;
      for (std::size_t j = 0; j < spec.K; ++j) {
        const double term = counts[a] * u * ((j == a ? 1.0 : 0.0) - pi[j]);
        pg[j] += term;
        if (keep) kg[j] += term;
      }
    }
    // An all-zero batch gradient makes no progress: cosine 0.
    if (norm(pg) > 0.0) r.mean_cos_pg += cosine(pg, grad_J);
    if (norm(kg) > 0.0) {
      const double c = cosine(kg, grad_J);
      r.mean_cos_kg += c;
      r.min_cos_kg = std::min(r.min_cos_kg, c);
      ++with_keep;
    }
  }
  r.mean_cos_pg /= static_cast<double>(n_batches);
  r.ratio = r.mean_cos_pg / r.p_sqrt_B;
  if (with_keep > 0) r.mean_cos_kg /= static_cast<double>(with_keep);
  r.keep_fraction = static_cast<double>(with_keep) / static_cast<double>(n_batches);
  return r;
}

}  // namespace kondo
