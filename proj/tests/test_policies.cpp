#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "kondo/checkpoint.hpp"
#include "kondo/mlp_policy.hpp"
#include "kondo/sampling.hpp"
#include "kondo/transformer_policy.hpp"

using namespace kondo;

namespace {

Tensor random_images(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t({n, d});
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

TransformerConfig small_tf() {
  return {.vocab = 2, .separator = true, .max_len = 20, .d_model = 64, .layers = 2, .heads = 2, .ff = 256};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kondo_test_" + name);
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveUniformPolicy) {
  MlpPolicy mlp = MlpPolicy::zeros({});
  Rng rng(1, Stream::kTest);
  const Tensor logits = mlp.logits(random_images(4, 784, rng));
  for (std::size_t r = 0; r < 4; ++r) {
    const auto lp = log_softmax(logits.row(r));
    for (double v : lp) EXPECT_NEAR(std::exp(v), 0.1, 1e-15);
  }
}

TEST(Mlp, MatchesHandRolledOracle) {
  Rng rng(2, Stream::kTest);
  MlpPolicy mlp({}, rng);
  const Tensor x = random_images(3, 784, rng);
  const Tensor logits = mlp.logits(x);
  const auto ps = mlp.parameters();
  ASSERT_EQ(ps.size(), 6u);
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> h(x.row(r).begin(), x.row(r).end());
    for (std::size_t layer = 0; layer < 3; ++layer) {
      const Tensor& w = ps[2 * layer]->value;
      const Tensor& b = ps[2 * layer + 1]->value;
      std::vector<double> next(w.cols());
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = b[j];
        for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * w.at(i, j);
        next[j] = layer < 2 ? std::max(s, 0.0) : s;
      }
      h = std::move(next);
    }
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(logits.at(r, j), h[j], 1e-12);
  }
}

TEST(Mlp, TapeForwardMatchesEvalForwardAndCountsSamples) {
  Rng rng(3, Stream::kTest);
  MlpPolicy mlp({}, rng);
  const Tensor x = random_images(7, 784, rng);
  ComputeMeter meter;
  Tape t;
  const Var y = mlp.forward(t, t.input(x), &meter);
  EXPECT_EQ(meter.forward_samples(), 7u);
  const Tensor direct = mlp.logits(x);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(t.value(y)[i], direct[i], 1e-12);
}

TEST(Mlp, SoftmaxRowsSumToOne) {
  Rng rng(4, Stream::kTest);
  MlpPolicy mlp({}, rng);
  const Tensor logits = mlp.logits(random_images(20, 784, rng));
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0.0;
    for (double v : log_softmax(logits.row(r))) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Transformer, CausalityUnderPerturbation) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, Stream::kTest);
    TransformerPolicy tf(small_tf(), rng);
    const std::size_t T = 12;
    std::vector<std::uint32_t> tokens(T);
    for (auto& tok : tokens) tok = static_cast<std::uint32_t>(rng.uniform_index(3));
    const Tensor base = tf.logits(tokens, T);
    for (std::size_t pos = 0; pos < T; ++pos) {
      auto changed = tokens;
      changed[pos] = (changed[pos] + 1) % 3;
      const Tensor out = tf.logits(changed, T);
      for (std::size_t t = 0; t < pos; ++t)
        for (std::size_t v = 0; v < 2; ++v) ASSERT_EQ(out.at(t, v), base.at(t, v)) << "seed " << seed;
    }
  }
}

TEST(Transformer, DecoderMatchesFullPass) {
  Rng rng(11, Stream::kTest);
  TransformerPolicy tf(small_tf(), rng);
  const std::size_t T = 9, n = 3;
  std::vector<std::uint32_t> tokens(n * T);
  for (auto& tok : tokens) tok = static_cast<std::uint32_t>(rng.uniform_index(3));
  const Tensor full = tf.logits(tokens, T);
  auto dec = tf.decoder(n);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::uint32_t> step(n);
    for (std::size_t s = 0; s < n; ++s) step[s] = tokens[s * T + t];
    const Tensor out = dec.feed(step);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t v = 0; v < 2; ++v) EXPECT_NEAR(out.at(s, v), full.at(s * T + t, v), 1e-10);
  }
}

TEST(Transformer, RejectsOutOfRangeToken) {
  Rng rng(12, Stream::kTest);
  TransformerPolicy tf(small_tf(), rng);
  const std::vector<std::uint32_t> tokens = {0, 1, 7};
  EXPECT_ANY_THROW(tf.logits(tokens, 3));
}

TEST(Sampling, DegenerateLogitsAlwaysPickTheSpike) {
  Rng rng(1, Stream::kAction);
  std::vector<double> logits(10, 0.0);
  logits[0] = 1000.0;
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(sample_action(logits, rng).action, 0u);
}

TEST(Sampling, UniformFrequencies) {
  Rng rng(2, Stream::kAction);
  const std::vector<double> logits(10, 0.0);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) ++counts[sample_action(logits, rng).action];
  for (int c : counts) EXPECT_NEAR(c / 1e5, 0.1, 0.01);
}

TEST(Sampling, LogProbIsLogSoftmaxAtAction) {
  Rng rng(3, Stream::kAction);
  const std::vector<double> logits = {0.3, -1.2, 2.0, 0.0};
  const auto lp = log_softmax(logits);
  for (int i = 0; i < 100; ++i) {
    const auto d = sample_action(logits, rng);
    EXPECT_EQ(d.log_prob, lp[d.action]);
    EXPECT_EQ(d.logits, logits);
  }
}

TEST(Rollout, ResponseLengthEqualsHorizon) {
  Rng init(4, Stream::kPolicyInit), act(4, Stream::kAction);
  TransformerPolicy tf(small_tf(), init);
  for (std::size_t H : {1u, 3u, 10u}) {
    std::vector<std::uint32_t> prompts(2 * H, 1);
    const auto r = rollout_reversal(tf, prompts, H, 3, &act);
    EXPECT_EQ(r.n_seq, 6u);
    EXPECT_EQ(r.responses.size(), 6 * H);
    EXPECT_EQ(r.draws.size(), 6 * H);
    for (auto tok : r.responses) EXPECT_LT(tok, 2u);
  }
}

TEST(Rollout, StepwiseLogProbsMatchTeacherForcing) {
  for (bool sep : {true, false}) {
    Rng init(5, Stream::kPolicyInit), act(5, Stream::kAction), env(5, Stream::kEnv);
    auto cfg = small_tf();
    cfg.separator = sep;
    TransformerPolicy tf(cfg, init);
    const std::size_t H = 8, P = 2, S = 3;
    std::vector<std::uint32_t> prompts(P * H);
    for (auto& t : prompts) t = static_cast<std::uint32_t>(env.uniform_index(2));
    ComputeMeter meter;
    const auto r = rollout_reversal(tf, prompts, H, S, &act, &meter);
    EXPECT_EQ(meter.forward_samples(), P * S * H);

    const auto tfl = teacher_forcing_layout(r.prompts, r.responses, H, sep, tf.sep_token());
    Tape tape;
    const auto out = tf.forward(tape, tfl.tokens, tfl.seq_len, tfl.out_rows);
    const Tensor& lp = tape.value(out.log_probs);
    for (std::size_t e = 0; e < P * S; ++e) {
      double stepwise = 0.0, forced = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        stepwise += r.draws[e * H + h].log_prob;
        forced += lp.at(e * H + h, r.responses[e * H + h]);
      }
      EXPECT_NEAR(stepwise, forced, 1e-10);
    }
  }
}

TEST(Rollout, GreedyIsDeterministic) {
  Rng init(6, Stream::kPolicyInit);
  TransformerPolicy tf(small_tf(), init);
  const std::vector<std::uint32_t> prompt = {0, 1, 1, 0, 1};
  const auto a = rollout_reversal(tf, prompt, 5, 1, nullptr);
  const auto b = rollout_reversal(tf, prompt, 5, 1, nullptr);
  EXPECT_EQ(a.responses, b.responses);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng init(7, Stream::kPolicyInit);
  TransformerPolicy a(small_tf(), init);
  Rng other(8, Stream::kPolicyInit);
  TransformerPolicy b(small_tf(), other);
  const auto path = temp_path("ckpt.bin");
  save_checkpoint(path, std::as_const(a).parameters());
  load_checkpoint(path, b.parameters());
  const auto pa = std::as_const(a).parameters();
  const auto pb = std::as_const(b).parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
  std::filesystem::remove(path);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  Rng init(9, Stream::kPolicyInit);
  MlpPolicy small({.inputs = 4, .hidden = 3, .hidden_layers = 2, .actions = 2}, init);
  MlpPolicy big({.inputs = 5, .hidden = 3, .hidden_layers = 2, .actions = 2}, init);
  const auto path = temp_path("ckpt_mismatch.bin");
  save_checkpoint(path, std::as_const(small).parameters());
  EXPECT_ANY_THROW(load_checkpoint(path, big.parameters()));
  std::filesystem::remove(path);
}

TEST(Checkpoint, ManifestIsPlainText) {
  Rng init(10, Stream::kPolicyInit);
  MlpPolicy mlp({.inputs = 4, .hidden = 3, .hidden_layers = 2, .actions = 2}, init);
  const auto path = temp_path("ckpt_manifest.bin");
  save_checkpoint(path, std::as_const(mlp).parameters());
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kondo-checkpoint 1");
  std::getline(in, line);
  EXPECT_EQ(line, "6");
  std::filesystem::remove(path);
}
