#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kondo/rng.hpp"
#include "kondo/tensor.hpp"

namespace kondo {

/// Per-sample learning-signal record.
struct Sample {
  std::size_t action = 0;
  double reward = 0.0;
  double baseline = 0.0;
  double advantage = 0.0;         // U = R - b
  double surprisal = 0.0;         // l = -log pi(A | H)
  double delight = 0.0;           // chi = U * l
  double screen_surprisal = 0.0;  // surprisal seen by the gate (noisy logits)
  double screen = 0.0;            // delight seen by the gate (after screening noise)
  double weight = 1.0;            // gate probability w
  bool kept = true;               // gate draw G
  std::size_t context = 0;
  std::int64_t position = -1;     // token position, -1 for bandits
  double pi_star = std::numeric_limits<double>::quiet_NaN();  // pi(y*) when the correct action is known
};

enum class BaselineKind { kZero, kConstant, kExpectedConfidence, kOracle, kGrouped };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kExpectedConfidence;
  double constant = 0.5;
};

enum class PriorityKind { kDelight, kAdvantage, kSurprisal, kAbsAdvantage, kUniform, kAdditive };

struct PrioritySpec {
  PriorityKind kind = PriorityKind::kDelight;
  double alpha = 0.5;  // additive mix: alpha*U + (1-alpha)*l
};

struct NoiseSpec {
  double delight_rel = 0.0;  // s: std multiplier of the within-batch std(chi)
  double delight_abs = 0.0;  // sigma_chi
  double logit = 0.0;        // sigma_Z
  double reward = 0.0;       // sigma_R, all actions
  double gamble = 0.0;       // sigma_G, only when the chosen action is `gamble_action`
  std::size_t gamble_action = 0;
  // Screening noise also reaches the update weights of delight-weighted methods.
  bool in_update = false;
};

std::string to_string(BaselineKind kind);
std::string to_string(PriorityKind kind);
BaselineKind parse_baseline_kind(const std::string& name);
PriorityKind parse_priority_kind(const std::string& name);

/// Credit for a contextual-bandit batch with deterministic 0/1 reward
/// r(a) = 1{a == label}. `rewards` are the observed (possibly noisy)
/// rewards. When `screen_logits` is given, the gate-facing surprisal and
/// delight are computed from it instead of `logits`.
std::vector<Sample> compute_credit(const Tensor& logits, std::span<const std::size_t> actions,
                                   std::span<const double> rewards, std::span<const std::size_t> labels,
                                   const BaselineSpec& baseline, const Tensor* screen_logits = nullptr);

/// Token-level credit for grouped sequence episodes. Episodes are laid out
/// as consecutive groups of `group_size` responses to the same prompt; each
/// episode has `horizon` tokens. The episode advantage is shared by all of
/// its tokens; surprisal and delight are per token.
std::vector<Sample> compute_sequence_credit(std::span<const double> episode_rewards, std::size_t group_size,
                                            std::span<const double> token_log_probs,
                                            std::span<const std::size_t> token_actions, std::size_t horizon,
                                            const BaselineSpec& baseline);

double priority_score(const Sample& s, const PrioritySpec& spec, Rng& rng);

/// Adds N(0, sigma_R^2) to every reward and N(0, sigma_G^2) to rewards of
/// the gamble action.
void perturb_rewards(std::span<double> rewards, std::span<const std::size_t> actions, const NoiseSpec& spec,
                     Rng& rng);
/// Returns logits + iid N(0, sigma^2).
Tensor perturb_logits(const Tensor& logits, double sigma, Rng& rng);
/// screen += N(0, (s*std(chi))^2) + N(0, sigma_chi^2), std over the batch's
/// clean delight.
void perturb_delight(std::span<Sample> samples, const NoiseSpec& spec, Rng& rng);

/// Throws std::logic_error if some sample with pi(A) < 1 has
/// sign(delight) != sign(advantage).
void check_sign_consistency(std::span<const Sample> samples);

double population_std(std::span<const double> xs);

}  // namespace kondo
