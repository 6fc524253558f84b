#include "kondo/gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kondo {

std::string to_string(GateMode mode) {
  switch (mode) {
    case GateMode::kRate: return "rate";
    case GateMode::kPrice: return "price";
    case GateMode::kAdaptiveZero: return "zero";
  }
  return "?";
}

GateMode parse_gate_mode(const std::string& name) {
  for (auto m : {GateMode::kRate, GateMode::kPrice, GateMode::kAdaptiveZero})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown gate mode '" + name + "'");
}

double gate_weight(double chi, double lambda, double tau) {
  const double diff = chi - lambda;
  if (diff == 0.0) return 0.5;
  if (tau <= 0.0) return diff > 0.0 ? 1.0 : 0.0;
  const double z = diff / tau;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double price_from_rate(std::span<const double> scores, double rate) {
  if (!(rate > 0.0) || rate > 1.0) throw std::invalid_argument("gate rate must be in (0, 1]");
  if (rate >= 1.0) return -std::numeric_limits<double>::infinity();
  if (scores.empty()) throw std::invalid_argument("price_from_rate: empty batch");
  const double n = static_cast<double>(scores.size());
  // The small guard keeps (1-rho)*B from landing one rank too high when it
  // is an integer up to rounding.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - rate) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

GateDecision apply_gate(std::span<Sample> samples, const GateConfig& config, const PrioritySpec& priority,
                        Rng& rng) {
  GateDecision out;
  std::vector<double> scores(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) scores[i] = priority_score(samples[i], priority, rng);

  double lambda = 0.0;
  switch (config.mode) {
    case GateMode::kRate: lambda = price_from_rate(scores, config.rate); break;
    case GateMode::kPrice: lambda = config.price; break;
    case GateMode::kAdaptiveZero: lambda = 0.0; break;
  }
  double tau = 0.0;
  if (!config.hard) tau = config.tau > 0.0 ? config.tau : config.tau_rel * population_std(scores);

  out.mask.assign(samples.size(), false);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample& s = samples[i];
    if (config.hard) {
      s.weight = scores[i] > lambda ? 1.0 : 0.0;
      s.kept = s.weight == 1.0;
    } else {
      s.weight = gate_weight(scores[i], lambda, tau);
      s.kept = rng.bernoulli(s.weight);
    }
    out.mask[i] = s.kept;
    if (s.kept) {
      ++out.stats.kept;
      if (!std::isnan(s.pi_star)) out.stats.pi_kept.push_back(s.pi_star);
    } else {
      ++out.stats.skipped;
      if (!std::isnan(s.pi_star)) out.stats.pi_skipped.push_back(s.pi_star);
    }
  }
  out.stats.lambda = lambda;
  out.stats.tau = tau;
  out.stats.eff_rate = samples.empty() ? 0.0 : static_cast<double>(out.stats.kept) / samples.size();
  return out;
}

}  // namespace kondo
