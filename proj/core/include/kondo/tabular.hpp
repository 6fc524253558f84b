#pragma once

#include <cstddef>
#include <vector>

#include "kondo/rng.hpp"

namespace kondo {

/// Symmetric K-armed bandit: pi(y*) = p, every other arm (1-p)/(K-1).
/// Deterministic 0/1 reward for the correct arm.
struct BanditSpec {
  std::size_t K = 10;
  std::size_t correct = 0;
  double p = 0.5;
  double b = 0.5;
};

std::vector<double> bandit_policy(const BanditSpec& spec);
/// Score vector phi(a) = e_a - pi (gradient of log pi(a) w.r.t. the logits).
std::vector<double> score_vector(const std::vector<double>& pi, std::size_t a);

double dot(const std::vector<double>& x, const std::vector<double>& y);
double norm(const std::vector<double>& x);
double cosine(const std::vector<double>& x, const std::vector<double>& y);

/// Standard normal CDF.
double normal_cdf(double x);

struct GeometryReport {
  double phi_star_sq = 0.0;              // explicit ||phi(y*)||^2
  double phi_star_sq_closed = 0.0;       // (1-p)^2 K/(K-1)
  double inner = 0.0;                    // explicit <phi(a), phi(y*)>, a != y*
  double inner_closed = 0.0;             // -p(1-p) K/(K-1)
  double cos_incorrect = 0.0;            // explicit cos(phi(a), grad J)
  double cos_incorrect_closed = 0.0;
  std::vector<double> grad_J;            // p * phi(y*)
  std::vector<double> mean_pg;           // E[g_PG]
  std::vector<double> mean_kg;           // E[g_KG] under the zero-price hard gate
  double var_perp_pg = 0.0;
  double var_perp_pg_closed = 0.0;       // (1-p) b^2 C
  double var_perp_kg = 0.0;
  double expected_backward_pg = 0.0;     // per sample
  double expected_backward_kg = 0.0;
};

/// Exact enumeration over the K outcomes of one draw. Requires K >= 3.
GeometryReport geometry(const BanditSpec& spec);

/// Squared-norm level treated as zero: rounding leaves about 1e-17 per
/// coordinate after projecting out the gradient direction.
inline constexpr double kNumericalZero = 1e-24;

struct ParetoReport {
  double cos_mean_kg = 0.0;        // cos(E[g_KG], grad J)
  double var_perp_kg = 0.0;
  double var_perp_pg = 0.0;
  double expected_backward = 0.0;  // over a batch of B
  double pB = 0.0;
  double keep_failure = 0.0;       // (1-p)^B
  double kg_batch_cos_given_keep = 0.0;  // cosine of the gated batch sum, any outcome with a keep
  bool pass = false;
};

ParetoReport pareto_check(const BanditSpec& spec, std::size_t B);

/// Separation threshold of the additive score alpha*U + (1-alpha)*l at b=p.
double alpha_star(double p, std::size_t K);
/// Boundary found by bisection on the direct comparison of the additive
/// score of the correct arm against an incorrect arm.
double separation_boundary(double p, std::size_t K, double tol = 1e-13);

struct GamblingReport {
  double probability = 0.0;  // Monte Carlo Pr(U_2 > 0 | A = 2)
  double standard_error = 0.0;
  double closed_form = 0.0;  // 1 - Phi((1-eps) Delta / sigma)
  double tail_bound = 0.0;   // exp(-(1-eps)^2 Delta^2 / (2 sigma^2))
  double amplification = 0.0;  // log(1/eps)
  bool within_3se = false;
};

/// Two-armed slot machine: arm 1 pays mu*, arm 2 pays mu* - Delta + N(0, sigma^2);
/// the policy puts eps on arm 2 and the baseline is mu* - eps*Delta.
GamblingReport gambling_check(double mu_star, double delta, double sigma, double eps, std::size_t n_draws, Rng& rng);

struct BatchCosineReport {
  double mean_cos_pg = 0.0;
  double p_sqrt_B = 0.0;
  double ratio = 0.0;
  double mean_cos_kg = 0.0;      // over batches with at least one keep
  double min_cos_kg = 0.0;
  double keep_fraction = 0.0;    // batches with at least one keep
};

/// Monte Carlo of the batch-summed PG and zero-price gated gradients.
BatchCosineReport batch_cosine_mc(const BanditSpec& spec, std::size_t B, std::size_t n_batches, Rng& rng);

}  // namespace kondo
