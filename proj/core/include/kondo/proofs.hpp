#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace kondo {

struct ProofResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;  // human-readable findings
};

/// Exact numerical checks of the tabular results. `name` is one of gate,
/// lemma1, prop1, prop2, prop3. Writes <name>.csv under `dir` with the grid,
/// measured values, closed forms and pass flags.
ProofResult prove(const std::string& name, const std::filesystem::path& dir);

/// Maximizer of chi*w - lambda*w + tau*H(w) over w in [0, 1] by a coarse
/// grid followed by a 1e-6 grid around the best coarse cell.
double brute_force_gate(double chi, double lambda, double tau);

}  // namespace kondo
