#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "kondo/gate.hpp"
#include "kondo/proofs.hpp"
#include "kondo/tabular.hpp"

using namespace kondo;

namespace {

std::vector<Sample> samples_with_delight(const std::vector<double>& chi) {
  std::vector<Sample> s(chi.size());
  for (std::size_t i = 0; i < chi.size(); ++i) {
    s[i].delight = s[i].screen = chi[i];
    s[i].advantage = chi[i];
    s[i].surprisal = s[i].screen_surprisal = 1.0;
  }
  return s;
}

std::vector<double> one_to(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

}  // namespace

TEST(GateWeight, SymmetryPointIsHalf) {
  for (double tau : {0.0, 0.1, 1.0, 10.0}) EXPECT_EQ(gate_weight(0.7, 0.7, tau), 0.5);
}

TEST(GateWeight, HardLimit) {
  EXPECT_EQ(gate_weight(1.0, 0.5, 0.0), 1.0);
  EXPECT_EQ(gate_weight(0.4, 0.5, 0.0), 0.0);
  EXPECT_EQ(gate_weight(1.0, 0.5, 1e-9), 1.0);
}

TEST(GateWeight, MonotoneInDelightAndPrice) {
  for (double tau : {0.1, 1.0, 10.0}) {
    double prev = -1.0;
    for (double chi = -5.0; chi <= 5.0; chi += 0.25) {
      const double w = gate_weight(chi, 0.3, tau);
      // Strict wherever the sigmoid has not saturated in double precision.
      if (prev < 1.0) {
        EXPECT_GT(w, prev);
      }
      EXPECT_GE(w, prev);
      prev = w;
    }
    prev = 2.0;
    for (double lam = -2.0; lam <= 2.0; lam += 0.25) {
      const double w = gate_weight(0.1, lam, tau);
      if (prev > 0.0 && prev < 2.0) {
        EXPECT_LT(w, prev);
      }
      EXPECT_LE(w, prev);
      prev = w;
    }
  }
}

TEST(GateWeight, MaximizesEntropyRegularizedObjective) {
  const auto r = prove("gate", std::filesystem::temp_directory_path() / "kondo_test_gate_proof");
  EXPECT_TRUE(r.pass);
}

TEST(Price, NearestRankQuantile) {
  const auto chi = one_to(100);
  EXPECT_EQ(price_from_rate(chi, 0.03), 97.0);
  auto s = samples_with_delight(chi);
  Rng rng(1, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.03}, {}, rng);
  EXPECT_EQ(d.stats.kept, 3u);
  EXPECT_EQ(d.stats.lambda, 97.0);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(d.mask[i], i >= 97);
}

TEST(Price, RateOneAdmitsEverything) {
  const auto chi = one_to(10);
  EXPECT_EQ(price_from_rate(chi, 1.0), -std::numeric_limits<double>::infinity());
  auto s = samples_with_delight(chi);
  Rng rng(2, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kRate, .rate = 1.0}, {}, rng);
  EXPECT_EQ(d.stats.kept, 10u);
  for (const auto& x : s) EXPECT_EQ(x.weight, 1.0);
}

TEST(Price, ErrorsOnEmptyBatchOrBadRate) {
  const std::vector<double> empty;
  EXPECT_THROW(price_from_rate(empty, 0.5), std::invalid_argument);
  const auto chi = one_to(5);
  EXPECT_THROW(price_from_rate(chi, 0.0), std::invalid_argument);
  EXPECT_THROW(price_from_rate(chi, 1.5), std::invalid_argument);
}

TEST(Price, TiesHardKeepsNoneSoftKeepsHalf) {
  std::vector<double> chi(20000, 0.8);
  EXPECT_EQ(price_from_rate(chi, 0.1), 0.8);
  auto s = samples_with_delight(chi);
  Rng rng(3, Stream::kGate);
  const auto hard = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.1}, {}, rng);
  EXPECT_EQ(hard.stats.kept, 0u);
  const auto soft = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.1, .hard = false, .tau = 1.0}, {}, rng);
  EXPECT_NEAR(soft.stats.eff_rate, 0.5, 0.015);
}

TEST(ApplyGate, CountsOnDistinctDelight) {
  Rng data(4, Stream::kTest);
  for (std::size_t B : {33u, 100u, 250u}) {
    std::vector<double> chi(B);
    for (double& c : chi) c = data.normal();
    auto s = samples_with_delight(chi);
    Rng rng(4, Stream::kGate);
    const auto d = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.03}, {}, rng);
    const double target = 0.03 * static_cast<double>(B);
    EXPECT_GE(static_cast<double>(d.stats.kept), std::floor(target));
    EXPECT_LE(static_cast<double>(d.stats.kept), std::ceil(target));
    EXPECT_EQ(d.stats.kept + d.stats.skipped, B);
  }
}

TEST(ApplyGate, SoftKeepRateFollowsWeight) {
  // chi - lambda = tau * logit(0.3) for every sample.
  const double tau = 1.0, lambda = 0.0;
  const double chi = tau * std::log(0.3 / 0.7);
  auto s = samples_with_delight(std::vector<double>(100000, chi));
  Rng rng(5, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kPrice, .price = lambda, .hard = false, .tau = tau}, {}, rng);
  EXPECT_NEAR(s[0].weight, 0.3, 1e-12);
  EXPECT_NEAR(d.stats.eff_rate, 0.3, 0.01);
}

TEST(ApplyGate, AdaptiveZeroKeepsOnlyCorrectActionsOnBandit) {
  const BanditSpec spec{.K = 10, .correct = 2, .p = 0.3, .b = 0.3};
  const auto pi = bandit_policy(spec);
  Rng draw(6, Stream::kAction);
  std::vector<Sample> s(500);
  for (auto& x : s) {
    x.action = draw.categorical(pi);
    x.reward = x.action == spec.correct ? 1.0 : 0.0;
    x.advantage = x.reward - spec.b;
    x.surprisal = x.screen_surprisal = -std::log(pi[x.action]);
    x.delight = x.screen = x.advantage * x.surprisal;
  }
  Rng rng(6, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kAdaptiveZero}, {}, rng);
  EXPECT_EQ(d.stats.lambda, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(d.mask[i], s[i].action == spec.correct);
}

TEST(ApplyGate, HardGateConsumesNoRandomness) {
  auto s = samples_with_delight(one_to(50));
  Rng rng(7, Stream::kGate), fresh(7, Stream::kGate);
  apply_gate(s, {.mode = GateMode::kRate, .rate = 0.2}, {}, rng);
  EXPECT_EQ(rng.next_u64(), fresh.next_u64());
}

TEST(ApplyGate, EffectiveRateWithinBand) {
  const std::size_t B = 100;
  Rng data(8, Stream::kTest);
  Rng rng(8, Stream::kGate);
  for (double rho : {0.01, 0.03, 0.1, 0.5}) {
    double mean = 0.0;
    for (int batch = 0; batch < 100; ++batch) {
      std::vector<double> chi(B);
      for (double& c : chi) c = data.normal();
      auto s = samples_with_delight(chi);
      mean += apply_gate(s, {.mode = GateMode::kRate, .rate = rho}, {}, rng).stats.eff_rate / 100.0;
    }
    EXPECT_NEAR(mean, rho, 2.0 / std::sqrt(static_cast<double>(B)));
  }
}

TEST(ApplyGate, RecordsPiStarOfKeptAndSkipped) {
  auto s = samples_with_delight(one_to(10));
  for (std::size_t i = 0; i < s.size(); ++i) s[i].pi_star = 0.1 * static_cast<double>(i);
  Rng rng(9, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.2}, {}, rng);
  EXPECT_EQ(d.stats.pi_kept.size(), 2u);
  EXPECT_EQ(d.stats.pi_skipped.size(), 8u);
}

TEST(ApplyGate, PriorityChangesTheRanking) {
  auto s = samples_with_delight({3.0, 1.0, 2.0});
  s[0].screen_surprisal = 0.1;
  s[1].screen_surprisal = 5.0;
  s[2].screen_surprisal = 1.0;
  Rng rng(10, Stream::kGate);
  const auto d = apply_gate(s, {.mode = GateMode::kRate, .rate = 0.34}, {.kind = PriorityKind::kSurprisal}, rng);
  EXPECT_EQ(d.mask, (std::vector<bool>{false, true, false}));
}
