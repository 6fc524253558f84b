#pragma once

#include <span>
#include <string>
#include <vector>

#include "kondo/credit.hpp"
#include "kondo/rng.hpp"

namespace kondo {

enum class GateMode {
  kRate,          // price = (1-rho) quantile of the batch scores
  kPrice,         // fixed price
  kAdaptiveZero,  // price = 0
};

std::string to_string(GateMode mode);
GateMode parse_gate_mode(const std::string& name);

struct GateConfig {
  GateMode mode = GateMode::kRate;
  double rate = 1.0;   // rho in (0, 1]
  double price = 0.0;  // lambda for kPrice
  bool hard = true;
  double tau = 0.0;       // soft temperature; <= 0 means tau_rel * std(scores)
  double tau_rel = 1e-3;
};

/// sigmoid((chi - lambda) / tau). A zero tau degenerates to the hard step,
/// with ties at 0.5.
double gate_weight(double chi, double lambda, double tau);

/// Nearest-rank (1-rho) quantile of the scores: the value at 1-based rank
/// ceil((1-rho) * B) of the ascending order. Returns -infinity for rho >= 1,
/// so every sample is admitted.
double price_from_rate(std::span<const double> scores, double rate);

struct GateStats {
  std::size_t kept = 0;
  std::size_t skipped = 0;
  double eff_rate = 0.0;
  double lambda = 0.0;
  double tau = 0.0;
  std::vector<double> pi_kept;     // pi(y*) of kept samples, when known
  std::vector<double> pi_skipped;
};

struct GateDecision {
  std::vector<bool> mask;
  GateStats stats;
};

/// Scores each sample with `priority`, sets the price, and draws the gate.
/// Writes Sample::weight and Sample::kept. Hard gates consume no randomness.
GateDecision apply_gate(std::span<Sample> samples, const GateConfig& config, const PrioritySpec& priority,
                        Rng& rng);

}  // namespace kondo
