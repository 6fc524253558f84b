#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "kondo/credit.hpp"
#include "kondo/sampling.hpp"
#include "kondo/tabular.hpp"

using namespace kondo;

namespace {

struct Batch {
  Tensor logits;
  std::vector<std::size_t> actions, labels;
  std::vector<double> rewards;
};

Batch random_batch(std::size_t n, std::size_t K, Rng& rng, double scale = 2.0) {
  Batch b;
  b.logits = Tensor({n, K});
  for (double& v : b.logits.data()) v = scale * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    b.actions.push_back(sample_action(b.logits.row(i), rng).action);
    b.labels.push_back(rng.uniform_index(K));
    b.rewards.push_back(b.actions.back() == b.labels.back() ? 1.0 : 0.0);
  }
  return b;
}

}  // namespace

TEST(Credit, ExpectedConfidenceAdvantages) {
  Rng rng(1, Stream::kTest);
  const Batch b = random_batch(200, 10, rng);
  const auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double p = std::exp(log_softmax(b.logits.row(i))[b.labels[i]]);
    EXPECT_NEAR(samples[i].baseline, p, 1e-12);
    EXPECT_NEAR(samples[i].pi_star, p, 1e-12);
    if (b.actions[i] == b.labels[i]) {
      EXPECT_NEAR(samples[i].advantage, 1.0 - p, 1e-12);
    } else {
      EXPECT_NEAR(samples[i].advantage, -p, 1e-12);
    }
  }
}

TEST(Credit, UniformPolicyCorrectAction) {
  const Tensor logits({1, 10});
  const std::vector<std::size_t> actions = {3}, labels = {3};
  const std::vector<double> rewards = {1.0};
  const auto s = compute_credit(logits, actions, rewards, labels, {})[0];
  EXPECT_NEAR(s.surprisal, std::log(10.0), 1e-14);
  EXPECT_NEAR(s.advantage, 0.9, 1e-14);
  EXPECT_NEAR(s.delight, 0.9 * std::log(10.0), 1e-14);
  EXPECT_NEAR(s.delight, 2.0723, 1e-4);
}

TEST(Credit, OracleBaselineZeroesEverything) {
  Rng rng(2, Stream::kTest);
  const Batch b = random_batch(100, 10, rng);
  const auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {.kind = BaselineKind::kOracle});
  for (const auto& s : samples) {
    EXPECT_EQ(s.advantage, 0.0);
    EXPECT_EQ(s.delight, 0.0);
  }
}

TEST(Credit, ConstantAndZeroBaselines) {
  Rng rng(3, Stream::kTest);
  const Batch b = random_batch(50, 4, rng);
  const auto c = compute_credit(b.logits, b.actions, b.rewards, b.labels, {.kind = BaselineKind::kConstant});
  const auto z = compute_credit(b.logits, b.actions, b.rewards, b.labels, {.kind = BaselineKind::kZero});
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c[i].advantage, b.rewards[i] - 0.5);
    EXPECT_EQ(z[i].advantage, b.rewards[i]);
  }
}

TEST(Credit, DelightSignMatchesAdvantageSign) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, Stream::kTest);
    const Batch b = random_batch(100, 10, rng);
    const auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {});
    EXPECT_NO_THROW(check_sign_consistency(samples));
    for (const auto& s : samples) {
      EXPECT_GT(s.surprisal, 0.0);
      EXPECT_EQ(std::signbit(s.delight), std::signbit(s.advantage));
    }
  }
}

TEST(Credit, SignCheckCatchesCorruption) {
  std::vector<Sample> s(1);
  s[0].advantage = 1.0;
  s[0].surprisal = 0.5;
  s[0].delight = -0.5;
  EXPECT_THROW(check_sign_consistency(s), std::logic_error);
}

TEST(Credit, GroupedBaselineSumsToZeroPerGroup) {
  Rng rng(4, Stream::kTest);
  const std::size_t P = 7, S = 5, H = 4;
  std::vector<double> rewards(P * S), lps(P * S * H);
  std::vector<std::size_t> acts(P * S * H, 0);
  for (double& r : rewards) r = rng.uniform();
  for (double& l : lps) l = -rng.uniform() * 3.0;
  const auto samples = compute_sequence_credit(rewards, S, lps, acts, H, {.kind = BaselineKind::kGrouped});
  ASSERT_EQ(samples.size(), P * S * H);
  for (std::size_t p = 0; p < P; ++p) {
    double sum = 0.0;
    for (std::size_t j = 0; j < S; ++j) sum += samples[(p * S + j) * H].advantage;
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
  for (std::size_t e = 0; e < P * S; ++e) {
    for (std::size_t h = 0; h < H; ++h) {
      const auto& s = samples[e * H + h];
      EXPECT_EQ(s.advantage, samples[e * H].advantage);
      EXPECT_EQ(s.surprisal, -lps[e * H + h]);
      EXPECT_EQ(s.position, static_cast<std::int64_t>(h));
    }
  }
}

TEST(Credit, GroupedBaselineRejectsSingleResponse) {
  const std::vector<double> rewards = {1.0, 0.0};
  const std::vector<double> lps = {-0.1, -0.2};
  const std::vector<std::size_t> acts = {0, 1};
  EXPECT_THROW(compute_sequence_credit(rewards, 1, lps, acts, 1, {.kind = BaselineKind::kGrouped}),
               std::invalid_argument);
}

TEST(Priority, KindsReadTheRightFields) {
  Sample s;
  s.advantage = -0.3;
  s.surprisal = 2.0;
  s.delight = -0.6;
  s.screen_surprisal = 2.5;
  s.screen = -0.75;
  Rng rng(5, Stream::kTest);
  EXPECT_EQ(priority_score(s, {.kind = PriorityKind::kDelight}, rng), -0.75);
  EXPECT_EQ(priority_score(s, {.kind = PriorityKind::kAdvantage}, rng), -0.3);
  EXPECT_EQ(priority_score(s, {.kind = PriorityKind::kSurprisal}, rng), 2.5);
  EXPECT_EQ(priority_score(s, {.kind = PriorityKind::kAbsAdvantage}, rng), 0.3);
  EXPECT_EQ(priority_score(s, {.kind = PriorityKind::kAdditive, .alpha = 1.0}, rng), -0.3);
  EXPECT_DOUBLE_EQ(priority_score(s, {.kind = PriorityKind::kAdditive, .alpha = 0.25}, rng),
                   0.25 * -0.3 + 0.75 * 2.5);
  const double u = priority_score(s, {.kind = PriorityKind::kUniform}, rng);
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}

TEST(Priority, AdditiveSeparationFlipsAtAlphaStar) {
  // K=10, p=b=0.5: correct arm U=0.5, l=log 2; incorrect arm U=-0.5, l=log 18.
  const double L = std::log(9.0), a_star = L / (1.0 + L);
  EXPECT_NEAR(a_star, 0.69, 0.005);
  const auto score_gap = [](double alpha) {
    const double good = alpha * 0.5 + (1 - alpha) * std::log(2.0);
    const double bad = alpha * -0.5 + (1 - alpha) * std::log(18.0);
    return good - bad;
  };
  EXPECT_LT(score_gap(a_star - 1e-6), 0.0);
  EXPECT_GT(score_gap(a_star + 1e-6), 0.0);
  EXPECT_NEAR(alpha_star(0.5, 10), a_star, 1e-12);
}

TEST(Noise, ZeroScalesAreBitIdentical) {
  Rng rng(6, Stream::kTest);
  Batch b = random_batch(64, 10, rng);
  const auto rewards = b.rewards;
  Rng noise(6, Stream::kNoise);
  perturb_rewards(b.rewards, b.actions, {}, noise);
  EXPECT_EQ(b.rewards, rewards);
  EXPECT_EQ(perturb_logits(b.logits, 0.0, noise), b.logits);
  auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {});
  const auto before = samples;
  perturb_delight(samples, {}, noise);
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(samples[i].screen, before[i].screen);
}

TEST(Noise, GambleRewardStd) {
  Rng noise(7, Stream::kNoise);
  const std::size_t n = 100000;
  std::vector<double> rewards(n, 0.0);
  std::vector<std::size_t> actions(n, 0);
  perturb_rewards(rewards, actions, {.gamble = 5.0, .gamble_action = 0}, noise);
  EXPECT_NEAR(population_std(rewards) / 5.0, 1.0, 0.02);

  // Non-gamble actions are untouched by gamble noise.
  std::vector<double> other(100, 0.25);
  std::vector<std::size_t> other_actions(100, 3);
  perturb_rewards(other, other_actions, {.gamble = 5.0, .gamble_action = 0}, noise);
  for (double r : other) EXPECT_EQ(r, 0.25);
}

TEST(Noise, RelativeDelightNoiseScale) {
  Rng rng(8, Stream::kTest);
  const Batch b = random_batch(10000, 10, rng);
  auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {});
  Rng noise(8, Stream::kNoise);
  perturb_delight(samples, {.delight_rel = 0.5}, noise);
  std::vector<double> chi, diff;
  for (const auto& s : samples) {
    chi.push_back(s.delight);
    diff.push_back(s.screen - s.delight);
  }
  const double ratio = population_std(diff) / population_std(chi);
  EXPECT_GE(ratio, 0.45);
  EXPECT_LE(ratio, 0.55);
}

TEST(Noise, LogitNoiseFeedsOnlyTheScreen) {
  Rng rng(9, Stream::kTest);
  const Batch b = random_batch(32, 10, rng);
  Rng noise(9, Stream::kNoise);
  const Tensor noisy = perturb_logits(b.logits, 1.0, noise);
  const auto samples = compute_credit(b.logits, b.actions, b.rewards, b.labels, {}, &noisy);
  const auto clean = compute_credit(b.logits, b.actions, b.rewards, b.labels, {});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(samples[i].delight, clean[i].delight);
    EXPECT_EQ(samples[i].screen_surprisal, -log_softmax(noisy.row(i))[b.actions[i]]);
  }
}

TEST(Credit, EnumNamesRoundTrip) {
  for (auto k : {BaselineKind::kZero, BaselineKind::kConstant, BaselineKind::kExpectedConfidence,
                 BaselineKind::kOracle, BaselineKind::kGrouped})
    EXPECT_EQ(parse_baseline_kind(to_string(k)), k);
  for (auto k : {PriorityKind::kDelight, PriorityKind::kAdvantage, PriorityKind::kSurprisal,
                 PriorityKind::kAbsAdvantage, PriorityKind::kUniform, PriorityKind::kAdditive})
    EXPECT_EQ(parse_priority_kind(to_string(k)), k);
  EXPECT_THROW(parse_baseline_kind("nope"), std::invalid_argument);
}
