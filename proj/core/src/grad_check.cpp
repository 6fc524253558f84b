#include "kondo/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "kondo/rng.hpp"

namespace kondo {

namespace {

std::pair<double, std::uint64_t> evaluate(const GraphBuilder& build) {
  Tape tape;
  const Var out = build(tape);
  return {tape.value(out)[0], tape.kink_signature()};
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                           GradCheckOptions options) {
  for (Parameter* p : params) {
    p->grad = Tensor(p->value.shape());
  }
  std::uint64_t base_signature = 0;
  {
    Tape tape;
    const Var out = build(tape);
    base_signature = tape.kink_signature();
    tape.backward_scalar(out);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i]->value.size(); ++j) coords.emplace_back(i, j);
  }
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    Rng rng(options.seed, Stream::kTest);
    for (std::size_t k = 0; k < options.max_coords; ++k) {
      const std::size_t pick = k + rng.uniform_index(coords.size() - k);
      std::swap(coords[k], coords[pick]);
    }
    coords.resize(options.max_coords);
  }

  GradCheckResult result;
  for (auto [i, j] : coords) {
    double& w = params[i]->value[j];
    const double saved = w;
    w = saved + options.h;
    const auto [fp, sp] = evaluate(build);
    w = saved - options.h;
    const auto [fm, sm] = evaluate(build);
    w = saved;
    if (options.skip_kinks && (sp != base_signature || sm != base_signature)) {
      ++result.skipped_kinks;
      continue;
    }
    const double fd = (fp - fm) / (2.0 * options.h);
    const double ad = params[i]->grad[j];
    const double rel = std::abs(ad - fd) / (std::abs(fd) + 1e-8);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace kondo
