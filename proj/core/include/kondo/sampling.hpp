#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kondo/rng.hpp"
#include "kondo/transformer_policy.hpp"

namespace kondo {

/// One categorical draw and the logit row it came from.
struct ActionDraw {
  std::size_t action = 0;
  double log_prob = 0.0;  // natural log
  std::vector<double> logits;
};

std::vector<double> log_softmax(std::span<const double> logits);
ActionDraw sample_action(std::span<const double> logits, Rng& rng);
ActionDraw greedy_action(std::span<const double> logits);

/// Packed teacher-forcing input for reversal episodes:
///   with separator:    [prompt(H)][SEP][response(0..H-2)]  (length 2H)
///   without separator: [prompt(H)][response(0..H-2)]       (length 2H-1)
/// out_rows lists, per episode, the H packed rows whose next-token
/// distribution scores response tokens 0..H-1.
struct TeacherForcing {
  std::vector<std::uint32_t> tokens;
  std::size_t seq_len = 0;
  std::vector<std::uint32_t> out_rows;
};

TeacherForcing teacher_forcing_layout(std::span<const std::uint32_t> prompts,
                                      std::span<const std::uint32_t> responses, std::size_t horizon,
                                      bool separator, std::uint32_t sep_token);

struct ReversalRollout {
  std::size_t n_seq = 0;
  std::size_t horizon = 0;
  std::vector<std::uint32_t> prompts;    // [n_seq * horizon], prompt of each episode
  std::vector<std::uint32_t> responses;  // [n_seq * horizon]
  std::vector<ActionDraw> draws;         // [n_seq * horizon]
};

/// Samples `responses_per_prompt` responses of length `horizon` for each of
/// the prompts packed in `prompts`. Episodes of prompt i occupy rows
/// i*S .. i*S+S-1. A null rng decodes greedily. Adds one forward sample per
/// generated token to `meter`.
ReversalRollout rollout_reversal(const TransformerPolicy& policy, std::span<const std::uint32_t> prompts,
                                 std::size_t horizon, std::size_t responses_per_prompt, Rng* rng,
                                 ComputeMeter* meter = nullptr);

}  // namespace kondo
