#include "kondo/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kondo {

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("log_softmax: empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

ActionDraw sample_action(std::span<const double> logits, Rng& rng) {
  const auto lp = log_softmax(logits);
  std::vector<double> p(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
  const std::size_t a = rng.categorical(p);
  return {a, lp[a], std::vector<double>(logits.begin(), logits.end())};
}

ActionDraw greedy_action(std::span<const double> logits) {
  const auto lp = log_softmax(logits);
  const auto a = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  return {a, lp[a], std::vector<double>(logits.begin(), logits.end())};
}

TeacherForcing teacher_forcing_layout(std::span<const std::uint32_t> prompts,
                                      std::span<const std::uint32_t> responses, std::size_t horizon,
                                      bool separator, std::uint32_t sep_token) {
  if (horizon == 0 || prompts.size() != responses.size() || prompts.size() % horizon != 0) {
    throw std::invalid_argument("teacher_forcing_layout: inconsistent prompt/response sizes");
  }
  const std::size_t n = prompts.size() / horizon;
  TeacherForcing tf;
  tf.seq_len = separator ? 2 * horizon : 2 * horizon - 1;
  tf.tokens.reserve(n * tf.seq_len);
  tf.out_rows.reserve(n * horizon);
  const std::size_t first_out = separator ? horizon : horizon - 1;
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t base = e * horizon;
    tf.tokens.insert(tf.tokens.end(), prompts.begin() + base, prompts.begin() + base + horizon);
    if (separator) tf.tokens.push_back(sep_token);
    tf.tokens.insert(tf.tokens.end(), responses.begin() + base, responses.begin() + base + horizon - 1);
    for (std::size_t h = 0; h < horizon; ++h) {
      tf.out_rows.push_back(static_cast<std::uint32_t>(e * tf.seq_len + first_out + h));
    }
  }
  return tf;
}

ReversalRollout rollout_reversal(const TransformerPolicy& policy, std::span<const std::uint32_t> prompts,
                                 std::size_t horizon, std::size_t responses_per_prompt, Rng* rng,
                                 ComputeMeter* meter) {
  if (horizon == 0 || prompts.size() % horizon != 0) {
    throw std::invalid_argument("rollout_reversal: prompt buffer is not a multiple of the horizon");
  }
  const std::size_t n_prompts = prompts.size() / horizon;
  const std::size_t S = responses_per_prompt;
  const bool sep = policy.config().separator;

  TransformerDecoder dec = policy.decoder(n_prompts);
  std::vector<std::uint32_t> step(n_prompts);
  Tensor logits;
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t i = 0; i < n_prompts; ++i) step[i] = prompts[i * horizon + h];
    logits = dec.feed(step);
  }
  if (sep) {
    std::fill(step.begin(), step.end(), policy.sep_token());
    logits = dec.feed(step);
  }
  dec.repeat_each(S);
  {
    Tensor grown(Shape{n_prompts * S, logits.cols()});
    for (std::size_t i = 0; i < n_prompts; ++i)
      for (std::size_t k = 0; k < S; ++k) {
        const auto src = logits.row(i);
        std::copy(src.begin(), src.end(), grown.row(i * S + k).begin());
      }
    logits = std::move(grown);
  }

  ReversalRollout out;
  out.n_seq = n_prompts * S;
  out.horizon = horizon;
  out.prompts.resize(out.n_seq * horizon);
  out.responses.resize(out.n_seq * horizon);
  out.draws.resize(out.n_seq * horizon);
  for (std::size_t e = 0; e < out.n_seq; ++e) {
    std::copy_n(prompts.begin() + (e / S) * horizon, horizon, out.prompts.begin() + e * horizon);
  }
  std::vector<std::uint32_t> next(out.n_seq);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t e = 0; e < out.n_seq; ++e) {
      ActionDraw d = rng ? sample_action(logits.row(e), *rng) : greedy_action(logits.row(e));
      next[e] = static_cast<std::uint32_t>(d.action);
      out.responses[e * horizon + h] = next[e];
      out.draws[e * horizon + h] = std::move(d);
    }
    if (h + 1 < horizon) logits = dec.feed(next);
  }
  if (meter) meter->add_forward(out.n_seq * horizon);
  return out;
}

}  // namespace kondo
