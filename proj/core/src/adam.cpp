#include "kondo/adam.hpp"

#include <cmath>

namespace kondo {

double Adam::step(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NonFiniteError("adam_step(" + p->name + ")", t_ + 1);
  }
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (m_[i].shape() != p.value.shape()) throw ShapeError("adam: moment shape differs from " + p.name);
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g[j];
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g[j] * g[j];
      const double delta = -opt_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opt_.eps);
      w[j] += delta;
      sq += delta * delta;
    }
  }
  return std::sqrt(sq);
}

}  // namespace kondo
