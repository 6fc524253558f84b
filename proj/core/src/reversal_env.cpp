#include "kondo/reversal_env.hpp"

#include <stdexcept>

namespace kondo {

void validate(const ReversalSpec& spec) {
  if (spec.vocab < 2) throw std::invalid_argument("reversal.vocab must be at least 2");
  if (spec.length < 1) throw std::invalid_argument("reversal.length must be at least 1");
  if (spec.prompts < 1) throw std::invalid_argument("reversal.prompts must be at least 1");
  if (spec.responses < 1) throw std::invalid_argument("reversal.responses must be at least 1");
  if (spec.kappa != 1.0) throw std::invalid_argument("reversal.kappa: only 1 (identity shaping) is supported");
}

std::vector<std::uint32_t> draw_prompts(const ReversalSpec& spec, Rng& rng) {
  std::vector<std::uint32_t> out(spec.prompts * spec.length);
  for (auto& t : out) t = static_cast<std::uint32_t>(rng.uniform_index(spec.vocab));
  return out;
}

double episode_reward(std::span<const std::uint32_t> prompt, std::span<const std::uint32_t> response) {
  const std::size_t H = prompt.size();
  if (response.size() != H) throw ShapeError("episode_reward: response length differs from prompt length");
  if (H == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t h = 0; h < H; ++h) hits += response[h] == prompt[H - 1 - h];
  return static_cast<double>(hits) / static_cast<double>(H);
}

ReversalStep reversal_step(const TransformerPolicy& policy, const ReversalSpec& spec, const BaselineSpec& baseline,
                           Rng& env_rng, Rng& action_rng, ComputeMeter* meter) {
  validate(spec);
  const std::size_t H = spec.length;
  const auto prompts = draw_prompts(spec, env_rng);
  ReversalStep out;
  out.rollout = rollout_reversal(policy, prompts, H, spec.responses, &action_rng, meter);
  const std::size_t n = out.rollout.n_seq;
  out.episode_rewards.resize(n);
  double total = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    const std::span<const std::uint32_t> p(out.rollout.prompts.data() + e * H, H);
    const std::span<const std::uint32_t> r(out.rollout.responses.data() + e * H, H);
    out.episode_rewards[e] = episode_reward(p, r);
    total += out.episode_rewards[e];
  }
  out.mean_reward = total / static_cast<double>(n);

  std::vector<double> log_probs(n * H);
  std::vector<std::size_t> actions(n * H);
  for (std::size_t t = 0; t < n * H; ++t) {
    log_probs[t] = out.rollout.draws[t].log_prob;
    actions[t] = out.rollout.draws[t].action;
  }
  out.samples = compute_sequence_credit(out.episode_rewards, spec.responses, log_probs, actions, H, baseline);
  return out;
}

double greedy_reward(const TransformerPolicy& policy, std::span<const std::uint32_t> prompts, std::size_t horizon) {
  if (horizon == 0 || prompts.size() % horizon != 0) throw ShapeError("greedy_reward: bad prompt packing");
  const auto roll = rollout_reversal(policy, prompts, horizon, 1, nullptr, nullptr);
  double total = 0.0;
  for (std::size_t e = 0; e < roll.n_seq; ++e) {
    total += episode_reward({roll.prompts.data() + e * horizon, horizon},
                            {roll.responses.data() + e * horizon, horizon});
  }
  return total / static_cast<double>(roll.n_seq);
}

}  // namespace kondo
