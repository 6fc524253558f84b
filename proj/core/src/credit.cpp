#include "kondo/credit.hpp"

#include <cmath>
#include <stdexcept>

#include "kondo/sampling.hpp"

namespace kondo {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kZero: return "zero";
    case BaselineKind::kConstant: return "constant";
    case BaselineKind::kExpectedConfidence: return "expected";
    case BaselineKind::kOracle: return "oracle";
    case BaselineKind::kGrouped: return "grouped";
  }
  return "?";
}

std::string to_string(PriorityKind kind) {
  switch (kind) {
    case PriorityKind::kDelight: return "delight";
    case PriorityKind::kAdvantage: return "advantage";
    case PriorityKind::kSurprisal: return "surprisal";
    case PriorityKind::kAbsAdvantage: return "abs_advantage";
    case PriorityKind::kUniform: return "uniform";
    case PriorityKind::kAdditive: return "additive";
  }
  return "?";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  for (auto k : {BaselineKind::kZero, BaselineKind::kConstant, BaselineKind::kExpectedConfidence,
                 BaselineKind::kOracle, BaselineKind::kGrouped})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown baseline '" + name + "'");
}

PriorityKind parse_priority_kind(const std::string& name) {
  for (auto k : {PriorityKind::kDelight, PriorityKind::kAdvantage, PriorityKind::kSurprisal,
                 PriorityKind::kAbsAdvantage, PriorityKind::kUniform, PriorityKind::kAdditive})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown priority '" + name + "'");
}

std::vector<Sample> compute_credit(const Tensor& logits, std::span<const std::size_t> actions,
                                   std::span<const double> rewards, std::span<const std::size_t> labels,
                                   const BaselineSpec& baseline, const Tensor* screen_logits) {
  const std::size_t n = logits.rows();
  if (actions.size() != n || rewards.size() != n || labels.size() != n)
    throw ShapeError("compute_credit: batch size mismatch");
  if (screen_logits && screen_logits->shape() != logits.shape())
    throw ShapeError("compute_credit: screen logits shape mismatch");
  if (baseline.kind == BaselineKind::kGrouped)
    throw std::invalid_argument("compute_credit: grouped baseline needs grouped episodes");

  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lp = log_softmax(logits.row(i));
    Sample& s = out[i];
    s.action = actions[i];
    s.reward = rewards[i];
    s.context = i;
    if (labels[i] < lp.size()) s.pi_star = std::exp(lp[labels[i]]);
    switch (baseline.kind) {
      case BaselineKind::kZero: s.baseline = 0.0; break;
      case BaselineKind::kConstant: s.baseline = baseline.constant; break;
      case BaselineKind::kExpectedConfidence: s.baseline = s.pi_star; break;
      case BaselineKind::kOracle: s.baseline = actions[i] == labels[i] ? 1.0 : 0.0; break;
      case BaselineKind::kGrouped: break;
    }
    s.advantage = s.reward - s.baseline;
    s.surprisal = -lp[s.action];
    s.delight = s.advantage * s.surprisal;
    if (screen_logits) {
      s.screen_surprisal = -log_softmax(screen_logits->row(i))[s.action];
    } else {
      s.screen_surprisal = s.surprisal;
    }
    s.screen = s.advantage * s.screen_surprisal;
  }
  return out;
}

std::vector<Sample> compute_sequence_credit(std::span<const double> episode_rewards, std::size_t group_size,
                                            std::span<const double> token_log_probs,
                                            std::span<const std::size_t> token_actions, std::size_t horizon,
                                            const BaselineSpec& baseline) {
  const std::size_t episodes = episode_rewards.size();
  if (token_log_probs.size() != episodes * horizon || token_actions.size() != episodes * horizon)
    throw ShapeError("compute_sequence_credit: token count mismatch");
  std::vector<double> base(episodes, 0.0);
  switch (baseline.kind) {
    case BaselineKind::kZero: break;
    case BaselineKind::kConstant: std::fill(base.begin(), base.end(), baseline.constant); break;
    case BaselineKind::kGrouped: {
      if (group_size < 2) throw std::invalid_argument("grouped baseline needs at least 2 responses per prompt");
      if (episodes % group_size != 0) throw ShapeError("episodes not a multiple of the group size");
      for (std::size_t g = 0; g < episodes; g += group_size) {
        double mean = 0.0;
        for (std::size_t j = 0; j < group_size; ++j) mean += episode_rewards[g + j];
        mean /= static_cast<double>(group_size);
        for (std::size_t j = 0; j < group_size; ++j) base[g + j] = mean;
      }
      break;
    }
    case BaselineKind::kExpectedConfidence:
    case BaselineKind::kOracle:
      throw std::invalid_argument("baseline '" + to_string(baseline.kind) + "' is not defined for sequences");
  }

  std::vector<Sample> out(episodes * horizon);
  for (std::size_t e = 0; e < episodes; ++e) {
    for (std::size_t h = 0; h < horizon; ++h) {
      Sample& s = out[e * horizon + h];
      s.action = token_actions[e * horizon + h];
      s.reward = episode_rewards[e];
      s.baseline = base[e];
      s.advantage = s.reward - s.baseline;
      s.surprisal = -token_log_probs[e * horizon + h];
      s.delight = s.advantage * s.surprisal;
      s.screen_surprisal = s.surprisal;
      s.screen = s.delight;
      s.context = e;
      s.position = static_cast<std::int64_t>(h);
    }
  }
  return out;
}

double priority_score(const Sample& s, const PrioritySpec& spec, Rng& rng) {
  switch (spec.kind) {
    case PriorityKind::kDelight: return s.screen;
    case PriorityKind::kAdvantage: return s.advantage;
    case PriorityKind::kSurprisal: return s.screen_surprisal;
    case PriorityKind::kAbsAdvantage: return std::abs(s.advantage);
    case PriorityKind::kUniform: return rng.uniform();
    case PriorityKind::kAdditive: return spec.alpha * s.advantage + (1.0 - spec.alpha) * s.screen_surprisal;
  }
  return s.screen;
}

void perturb_rewards(std::span<double> rewards, std::span<const std::size_t> actions, const NoiseSpec& spec,
                     Rng& rng) {
  if (rewards.size() != actions.size()) throw ShapeError("perturb_rewards: size mismatch");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (spec.reward > 0.0) rewards[i] += spec.reward * rng.normal();
    if (spec.gamble > 0.0 && actions[i] == spec.gamble_action) rewards[i] += spec.gamble * rng.normal();
  }
}

Tensor perturb_logits(const Tensor& logits, double sigma, Rng& rng) {
  Tensor out = logits;
  if (sigma > 0.0)
    for (double& z : out.data()) z += sigma * rng.normal();
  return out;
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

void perturb_delight(std::span<Sample> samples, const NoiseSpec& spec, Rng& rng) {
  if (spec.delight_rel <= 0.0 && spec.delight_abs <= 0.0) return;
  std::vector<double> chi(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) chi[i] = samples[i].delight;
  const double scale = spec.delight_rel * population_std(chi);
  for (Sample& s : samples) {
    if (scale > 0.0) s.screen += scale * rng.normal();
    if (spec.delight_abs > 0.0) s.screen += spec.delight_abs * rng.normal();
  }
}

void check_sign_consistency(std::span<const Sample> samples) {
  auto sign = [](double x) { return (x > 0) - (x < 0); };
  for (const Sample& s : samples) {
    if (s.surprisal <= 0.0) continue;  // pi(A) == 1
    if (sign(s.delight) != sign(s.advantage))
      throw std::logic_error("delight sign differs from advantage sign for context " + std::to_string(s.context));
  }
}

}  // namespace kondo
