#include "kondo/mlp_policy.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace kondo {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

MlpPolicy::MlpPolicy(MlpConfig config) : config_(config) {
  std::size_t fan_in = config_.inputs;
  for (std::size_t l = 0; l <= config_.hidden_layers; ++l) {
    const std::size_t fan_out = l == config_.hidden_layers ? config_.actions : config_.hidden;
    weights_.emplace_back("w" + std::to_string(l), Tensor({fan_in, fan_out}));
    weights_.emplace_back("b" + std::to_string(l), Tensor({fan_out}));
    fan_in = fan_out;
  }
}

MlpPolicy::MlpPolicy(MlpConfig config, Rng& init) : MlpPolicy(config) {
  for (std::size_t l = 0; l <= config_.hidden_layers; ++l) {
    Tensor& w = weights_[2 * l].value;
    const double fan_in = static_cast<double>(w.rows());
    const double stddev = l == config_.hidden_layers ? 1.0 / std::sqrt(fan_in) : std::sqrt(2.0 / fan_in);
    for (auto& v : w.data()) v = init.normal() * stddev;
  }
}

MlpPolicy MlpPolicy::zeros(MlpConfig config) { return MlpPolicy(config); }

Var MlpPolicy::forward(Tape& tape, Var x, ComputeMeter* meter) {
  if (tape.value(x).cols() != config_.inputs) {
    throw ShapeError("mlp: expected " + std::to_string(config_.inputs) + " input features, got " +
                     std::to_string(tape.value(x).cols()));
  }
  Var h = x;
  for (std::size_t l = 0; l <= config_.hidden_layers; ++l) {
    h = ops::add_bias(tape, ops::matmul(tape, h, tape.param(weights_[2 * l])), tape.param(weights_[2 * l + 1]));
    if (l < config_.hidden_layers) h = ops::relu(tape, h);
  }
  if (meter) meter->add_forward(tape.value(x).rows());
  return h;
}

Tensor MlpPolicy::logits(const Tensor& x) const {
  if (x.cols() != config_.inputs) throw ShapeError("mlp: input width mismatch");
  RowMat h = Eigen::Map<const RowMat>(x.data().data(), static_cast<Eigen::Index>(x.rows()),
                                      static_cast<Eigen::Index>(x.cols()));
  for (std::size_t l = 0; l <= config_.hidden_layers; ++l) {
    const Tensor& w = weights_[2 * l].value;
    const Tensor& b = weights_[2 * l + 1].value;
    RowMat next = h * Eigen::Map<const RowMat>(w.data().data(), static_cast<Eigen::Index>(w.rows()),
                                               static_cast<Eigen::Index>(w.cols()));
    next.rowwise() += Eigen::Map<const RowMat>(b.data().data(), 1, static_cast<Eigen::Index>(b.size())).row(0);
    if (l < config_.hidden_layers) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  Tensor out({x.rows(), config_.actions});
  std::copy(h.data(), h.data() + h.size(), out.data().begin());
  return out;
}

std::vector<Parameter*> MlpPolicy::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : weights_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> MlpPolicy::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : weights_) out.push_back(&p);
  return out;
}

}  // namespace kondo
