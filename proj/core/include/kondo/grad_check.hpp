#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kondo/tape.hpp"

namespace kondo {

/// Builds a scalar-valued graph on the given tape from the caller's
/// parameters.
using GraphBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double h = 1e-5;
  // 0 checks every coordinate; otherwise this many coordinates drawn uniformly.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Skip coordinates whose +-h stencil moves a relu across its kink.
  bool skip_kinks = true;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

/// Compares autodiff against central differences:
/// max |autodiff - fd| / (|fd| + 1e-8) over the checked coordinates.
GradCheckResult grad_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                           GradCheckOptions options = {});

}  // namespace kondo
