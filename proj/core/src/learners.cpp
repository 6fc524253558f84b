#include "kondo/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kondo {

std::string to_string(Method m) {
  switch (m) {
    case Method::kPG: return "PG";
    case Method::kDG: return "DG";
    case Method::kDGK: return "DG-K";
    case Method::kPPO: return "PPO";
    case Method::kPMPO: return "PMPO";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::kPG, Method::kDG, Method::kDGK, Method::kPPO, Method::kPMPO})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string to_string(UpdateWeighting w) { return w == UpdateWeighting::kAdvantage ? "advantage" : "delight"; }

UpdateWeighting parse_weighting(const std::string& name) {
  if (name == "advantage") return UpdateWeighting::kAdvantage;
  if (name == "delight") return UpdateWeighting::kDelight;
  throw std::invalid_argument("unknown update weighting '" + name + "'");
}

std::string to_string(DelightForm f) { return f == DelightForm::kProduct ? "product" : "sigmoid"; }

DelightForm parse_delight_form(const std::string& name) {
  if (name == "product") return DelightForm::kProduct;
  if (name == "sigmoid") return DelightForm::kSigmoid;
  throw std::invalid_argument("unknown delight form '" + name + "'");
}

TapeScoreTarget::TapeScoreTarget(Tape& tape, Var log_probs, std::span<const std::size_t> actions,
                                 std::vector<Parameter*> params)
    : tape_(&tape), actions_(actions.begin(), actions.end()), params_(std::move(params)) {
  std::vector<std::uint32_t> rows(actions.size()), cols(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    rows[i] = static_cast<std::uint32_t>(i);
    cols[i] = static_cast<std::uint32_t>(actions[i]);
  }
  picked_ = ops::pick(tape, log_probs, rows, cols);
}

std::vector<double> TapeScoreTarget::log_probs() {
  const auto& v = tape_->value(picked_);
  return {v.data().begin(), v.data().end()};
}

void TapeScoreTarget::backward(std::span<const double> coeff, const std::vector<bool>& mask, ComputeMeter* meter) {
  tape_->backward(picked_, coeff, mask, {.dense = false, .meter = meter});
}

ReversalScoreTarget::ReversalScoreTarget(TransformerPolicy& policy, const ReversalRollout& rollout, std::int64_t step)
    : policy_(&policy), rollout_(&rollout), step_(step) {}

std::vector<double> ReversalScoreTarget::log_probs() {
  const auto& r = *rollout_;
  const auto tf = teacher_forcing_layout(r.prompts, r.responses, r.horizon, policy_->config().separator,
                                         policy_->sep_token());
  const Tensor all = policy_->logits(tf.tokens, tf.seq_len);
  std::vector<double> out(tf.out_rows.size());
  for (std::size_t i = 0; i < tf.out_rows.size(); ++i) {
    const auto lp = log_softmax(all.row(tf.out_rows[i]));
    out[i] = lp[r.responses[i]];
  }
  return out;
}

void ReversalScoreTarget::backward(std::span<const double> coeff, const std::vector<bool>& mask,
                                   ComputeMeter* meter) {
  const auto& r = *rollout_;
  const std::size_t H = r.horizon;
  std::vector<std::size_t> episodes;
  for (std::size_t e = 0; e < r.n_seq; ++e) {
    for (std::size_t h = 0; h < H; ++h) {
      if (mask[e * H + h]) {
        episodes.push_back(e);
        break;
      }
    }
  }
  if (episodes.empty()) return;

  std::vector<std::uint32_t> prompts, responses;
  std::vector<double> seed;
  std::vector<bool> sub_mask;
  std::vector<std::uint32_t> rows, cols;
  for (std::size_t e : episodes) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t t = e * H + h;
      prompts.push_back(r.prompts[t]);
      responses.push_back(r.responses[t]);
      rows.push_back(static_cast<std::uint32_t>(rows.size()));
      cols.push_back(r.responses[t]);
      seed.push_back(coeff[t]);
      sub_mask.push_back(mask[t]);
    }
  }
  const auto tf =
      teacher_forcing_layout(prompts, responses, H, policy_->config().separator, policy_->sep_token());
  Tape tape(step_);
  const auto out = policy_->forward(tape, tf.tokens, tf.seq_len, tf.out_rows, nullptr);
  const Var picked = ops::pick(tape, out.log_probs, rows, cols);
  tape.backward(picked, seed, sub_mask, {.dense = false, .meter = meter});
}

std::vector<double> pg_coefficients(std::span<const Sample> samples) {
  std::vector<double> c(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) c[i] = samples[i].advantage;
  return c;
}

std::vector<double> dg_coefficients(std::span<const Sample> samples, bool use_screen, DelightForm form,
                                    double eta) {
  std::vector<double> c(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double chi = use_screen ? samples[i].screen : samples[i].delight;
    c[i] = form == DelightForm::kProduct ? chi : gate_weight(chi, 0.0, eta) * samples[i].advantage;
  }
  return c;
}

std::vector<double> pmpo_coefficients(std::span<const Sample> samples, double alpha) {
  std::vector<double> c(samples.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].advantage > 0.0) c[i] = alpha;
    if (samples[i].advantage < 0.0) c[i] = -1.0;
  }
  return c;
}

std::vector<double> ppo_coefficients(std::span<const Sample> samples, std::span<const double> log_prob_now,
                                     std::span<const double> log_prob_behavior, double clip, double* surrogate) {
  if (log_prob_now.size() != samples.size() || log_prob_behavior.size() != samples.size())
    throw ShapeError("ppo_coefficients: size mismatch");
  std::vector<double> c(samples.size());
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double u = samples[i].advantage;
    const double r = std::exp(log_prob_now[i] - log_prob_behavior[i]);
    const double unclipped = r * u;
    const double clipped = std::clamp(r, 1.0 - clip, 1.0 + clip) * u;
    if (unclipped <= clipped) {
      c[i] = r * u;
      total += unclipped;
    } else {
      c[i] = 0.0;
      total += clipped;
    }
  }
  if (surrogate) *surrogate = total;
  return c;
}

UpdateReport update(const AlgoConfig& config, std::span<Sample> samples, ScoreTarget& target, Adam& adam,
                    Rng& gate_rng, ComputeMeter* meter, bool noise_in_update) {
  const std::size_t n = samples.size();
  if (target.size() != n) throw ShapeError("update: target and sample counts differ");
  if (n == 0) throw std::invalid_argument("update: empty batch");

  UpdateReport report;
  report.forward_samples = n;
  for (const Sample& s : samples) report.mean_abs_delight += std::abs(s.delight);
  report.mean_abs_delight /= static_cast<double>(n);

  std::vector<double> coeff;
  std::vector<bool> mask(n, true);
  switch (config.method) {
    case Method::kPG: coeff = pg_coefficients(samples); break;
    case Method::kDG: coeff = dg_coefficients(samples, noise_in_update, config.dg_form, config.dg_eta); break;
    case Method::kDGK: {
      auto decision = apply_gate(samples, config.gate, config.priority, gate_rng);
      mask = std::move(decision.mask);
      report.gate = std::move(decision.stats);
      coeff = config.weighting == UpdateWeighting::kAdvantage ? pg_coefficients(samples)
                                                              : dg_coefficients(samples, noise_in_update);
      break;
    }
    case Method::kPPO: {
      if (config.ppo_epochs != 1) throw std::invalid_argument("PPO supports a single epoch per batch");
      std::vector<double> behavior(n), now(n);
      for (std::size_t i = 0; i < n; ++i) behavior[i] = now[i] = -samples[i].surprisal;
      coeff = ppo_coefficients(samples, now, behavior, config.ppo_clip, &report.surrogate);
      break;
    }
    case Method::kPMPO: coeff = pmpo_coefficients(samples, config.pmpo_alpha); break;
  }
  if (config.method != Method::kDGK) {
    report.gate.kept = n;
    report.gate.eff_rate = 1.0;
    report.gate.lambda = -std::numeric_limits<double>::infinity();
  }
  if (config.method != Method::kPPO) {
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) report.surrogate += coeff[i] * -samples[i].surprisal;
  }
  report.kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));

  auto params = target.parameters();
  for (Parameter* p : params) p->zero_grad();
  if (report.kept == 0) return report;

  std::vector<double> seed(n);
  for (std::size_t i = 0; i < n; ++i) seed[i] = -coeff[i] / static_cast<double>(n);
  ComputeMeter local;
  ComputeMeter* m = meter ? meter : &local;
  const auto before = m->backward_samples();
  target.backward(seed, mask, m);
  report.backward_samples = m->backward_samples() - before;
  report.delta_norm = adam.step(params);
  return report;
}

}  // namespace kondo
