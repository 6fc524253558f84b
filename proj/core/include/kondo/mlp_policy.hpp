#pragma once

#include <vector>

#include "kondo/rng.hpp"
#include "kondo/tape.hpp"

namespace kondo {

struct MlpConfig {
  std::size_t inputs = 784;
  std::size_t hidden = 100;
  std::size_t hidden_layers = 2;
  std::size_t actions = 10;
};

/// ReLU MLP producing one row of action logits per input row.
class MlpPolicy {
 public:
  /// He-normal hidden weights, 1/sqrt(fan_in) output weights, zero biases.
  MlpPolicy(MlpConfig config, Rng& init);
  /// All-zero weights; every input maps to uniform logits.
  static MlpPolicy zeros(MlpConfig config);

  /// Records the forward pass; adds one forward sample per input row.
  Var forward(Tape& tape, Var x, ComputeMeter* meter = nullptr);
  /// Tape-free forward for evaluation.
  Tensor logits(const Tensor& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  const MlpConfig& config() const { return config_; }

 private:
  explicit MlpPolicy(MlpConfig config);

  MlpConfig config_;
  std::vector<Parameter> weights_;  // w0, b0, w1, b1, ...
};

}  // namespace kondo
