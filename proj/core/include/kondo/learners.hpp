#pragma once

#include <span>
#include <string>
#include <vector>

#include "kondo/adam.hpp"
#include "kondo/credit.hpp"
#include "kondo/gate.hpp"
#include "kondo/mlp_policy.hpp"
#include "kondo/sampling.hpp"
#include "kondo/tape.hpp"
#include "kondo/transformer_policy.hpp"

namespace kondo {

enum class Method { kPG, kDG, kDGK, kPPO, kPMPO };
enum class UpdateWeighting { kAdvantage, kDelight };
// How DG turns delight into a per-sample weight: the raw product chi, or a
// sigmoid(chi / eta) gate on the advantage term.
enum class DelightForm { kProduct, kSigmoid };

std::string to_string(Method m);
Method parse_method(const std::string& name);
std::string to_string(UpdateWeighting w);
UpdateWeighting parse_weighting(const std::string& name);
std::string to_string(DelightForm f);
DelightForm parse_delight_form(const std::string& name);

struct AlgoConfig {
  Method method = Method::kPG;
  double lr = 1e-3;
  GateConfig gate;  // DG-K only
  PrioritySpec priority;
  double ppo_clip = 0.2;
  double pmpo_alpha = 1.0;
  double kl_coef = 0.0;
  std::size_t batch_size = 100;
  UpdateWeighting weighting = UpdateWeighting::kAdvantage;  // DG-K kept-sample weight
  int ppo_epochs = 1;
  DelightForm dg_form = DelightForm::kSigmoid;
  double dg_eta = 1.0;
};

struct UpdateReport {
  double delta_norm = 0.0;
  std::size_t kept = 0;
  std::uint64_t forward_samples = 0;
  std::uint64_t backward_samples = 0;
  double mean_abs_delight = 0.0;
  double surrogate = 0.0;
  GateStats gate;
};

/// Differentiable per-sample log pi(A_t | H_t) of a batch whose actions are
/// already drawn.
class ScoreTarget {
 public:
  virtual ~ScoreTarget() = default;
  virtual std::size_t size() const = 0;
  /// Current log pi(A_t) for every sample.
  virtual std::vector<double> log_probs() = 0;
  /// Accumulates sum_t coeff[t] * grad log pi(A_t) into parameter gradients,
  /// processing only samples with mask[t] set.
  virtual void backward(std::span<const double> coeff, const std::vector<bool>& mask, ComputeMeter* meter) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
};

/// Score target over a recorded bandit forward pass: `log_probs` is the
/// [B, K] log-softmax node on `tape`.
class TapeScoreTarget : public ScoreTarget {
 public:
  TapeScoreTarget(Tape& tape, Var log_probs, std::span<const std::size_t> actions, std::vector<Parameter*> params);
  std::size_t size() const override { return actions_.size(); }
  std::vector<double> log_probs() override;
  void backward(std::span<const double> coeff, const std::vector<bool>& mask, ComputeMeter* meter) override;
  std::vector<Parameter*> parameters() override { return params_; }

 private:
  Tape* tape_;
  Var picked_;
  std::vector<std::size_t> actions_;
  std::vector<Parameter*> params_;
};

/// Score target over reversal rollouts. Backward recomputes activations with
/// a teacher-forced tape pass over only those episodes with a kept token;
/// that recomputation is not counted as forward samples.
class ReversalScoreTarget : public ScoreTarget {
 public:
  ReversalScoreTarget(TransformerPolicy& policy, const ReversalRollout& rollout, std::int64_t step = 0);
  std::size_t size() const override { return rollout_->draws.size(); }
  std::vector<double> log_probs() override;
  void backward(std::span<const double> coeff, const std::vector<bool>& mask, ComputeMeter* meter) override;
  std::vector<Parameter*> parameters() override { return policy_->parameters(); }

 private:
  TransformerPolicy* policy_;
  const ReversalRollout* rollout_;
  std::int64_t step_;
};

// Per-sample coefficients c_t of the update sum_t c_t grad log pi(A_t).
std::vector<double> pg_coefficients(std::span<const Sample> samples);
/// kProduct: chi_t. kSigmoid: sigmoid(chi_t / eta) * U_t.
std::vector<double> dg_coefficients(std::span<const Sample> samples, bool use_screen = false,
                                    DelightForm form = DelightForm::kProduct, double eta = 1.0);
std::vector<double> pmpo_coefficients(std::span<const Sample> samples, double alpha);
/// Gradient coefficient of min(rU, clip(r, 1-eps, 1+eps) U) with respect to
/// log pi: r*U on the unclipped branch, 0 where the clip is active. Also
/// returns the surrogate value.
std::vector<double> ppo_coefficients(std::span<const Sample> samples, std::span<const double> log_prob_now,
                                     std::span<const double> log_prob_behavior, double clip, double* surrogate);

/// One learner step: gate (DG-K), backward over the retained samples with
/// loss -sum_t c_t log pi(A_t) / B, then an Adam step. `samples` carry the
/// behaviour log-probs implicitly as -surprisal. When nothing is kept the
/// optimizer is not stepped.
UpdateReport update(const AlgoConfig& config, std::span<Sample> samples, ScoreTarget& target, Adam& adam,
                    Rng& gate_rng, ComputeMeter* meter, bool noise_in_update = false);

}  // namespace kondo
