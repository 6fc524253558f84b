#pragma once

#include <cstdint>
#include <vector>

#include "kondo/tensor.hpp"

namespace kondo {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}

  /// Applies one update from the gradients currently held by `params`.
  /// Returns the L2 norm of the parameter change. Throws NonFiniteError on a
  /// non-finite gradient before touching any parameter.
  double step(const std::vector<Parameter*>& params);

  std::int64_t step_count() const { return t_; }
  const AdamOptions& options() const { return opt_; }
  void set_lr(double lr) { opt_.lr = lr; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions opt_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace kondo
