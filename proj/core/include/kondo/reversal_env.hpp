#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kondo/credit.hpp"
#include "kondo/rng.hpp"
#include "kondo/sampling.hpp"
#include "kondo/transformer_policy.hpp"

namespace kondo {

/// Token reversal: respond to a prompt of H tokens over [0, M) with the
/// prompt reversed. Each batch has P prompts with S responses each.
struct ReversalSpec {
  std::size_t vocab = 2;      // M
  std::size_t length = 10;    // H
  std::size_t prompts = 10;   // P
  std::size_t responses = 10; // S
  double kappa = 1.0;         // reward shaping; only the identity (1) is defined
};

void validate(const ReversalSpec& spec);

/// P*H prompt tokens drawn uniformly from [0, M).
std::vector<std::uint32_t> draw_prompts(const ReversalSpec& spec, Rng& rng);

/// Fraction of positions h with response[h] == prompt[H-1-h].
double episode_reward(std::span<const std::uint32_t> prompt, std::span<const std::uint32_t> response);

struct ReversalStep {
  ReversalRollout rollout;
  std::vector<double> episode_rewards;  // [P*S]
  std::vector<Sample> samples;          // [P*S*H], token level
  double mean_reward = 0.0;
};

/// Draws P prompts, samples S responses per prompt, scores them and builds
/// token-level credit with the episode advantage shared across tokens.
ReversalStep reversal_step(const TransformerPolicy& policy, const ReversalSpec& spec, const BaselineSpec& baseline,
                           Rng& env_rng, Rng& action_rng, ComputeMeter* meter);

/// Mean greedy-decoding reward over the given prompts (packed, H each).
double greedy_reward(const TransformerPolicy& policy, std::span<const std::uint32_t> prompts, std::size_t horizon);

}  // namespace kondo
