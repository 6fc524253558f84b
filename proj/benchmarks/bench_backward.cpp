// Backward cost against the fraction of samples the gate keeps. Forward
// passes are recorded outside the timed region.

#include <benchmark/benchmark.h>

#include <vector>

#include "kondo/mlp_policy.hpp"
#include "kondo/rng.hpp"
#include "kondo/tape.hpp"
#include "kondo/transformer_policy.hpp"

namespace {

using namespace kondo;

constexpr std::size_t kBatch = 100;

std::vector<bool> keep_first(std::size_t n, std::size_t kept) {
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < kept; ++i) mask[i * n / kept] = true;
  return mask;
}

void mlp_backward(benchmark::State& state, bool dense) {
  Rng rng(1, Stream::kTest);
  MlpPolicy mlp({.inputs = 784, .hidden = 100, .hidden_layers = 2, .actions = 10}, rng);
  Tensor x({kBatch, 784});
  for (double& v : x.data()) v = rng.uniform();
  std::vector<std::uint32_t> rows(kBatch), actions(kBatch);
  for (std::uint32_t i = 0; i < kBatch; ++i) {
    rows[i] = i;
    actions[i] = static_cast<std::uint32_t>(rng.uniform_index(10));
  }
  const auto mask = keep_first(kBatch, static_cast<std::size_t>(state.range(0)));
  const std::vector<double> seed(kBatch, -1.0 / kBatch);
  for (auto _ : state) {
    state.PauseTiming();
    Tape tape(0);
    const Var lp = ops::pick(tape, ops::log_softmax(tape, mlp.forward(tape, tape.input(x))), rows, actions);
    state.ResumeTiming();
    tape.backward(lp, seed, mask, {.dense = dense});
    benchmark::DoNotOptimize(mlp.parameters().front()->grad.data().data());
  }
  state.counters["kept"] = static_cast<double>(state.range(0));
}

void transformer_backward(benchmark::State& state, bool dense) {
  Rng rng(2, Stream::kTest);
  TransformerPolicy tf({.vocab = 2, .separator = true, .max_len = 21}, rng);
  const std::size_t n_seq = kBatch, T = 21;
  std::vector<std::uint32_t> tokens(n_seq * T), out_rows, targets;
  for (auto& t : tokens) t = static_cast<std::uint32_t>(rng.uniform_index(tf.input_vocab()));
  for (std::uint32_t s = 0; s < n_seq; ++s)
    for (std::uint32_t t = 10; t < T - 1; ++t) {
      out_rows.push_back(s * T + t);
      targets.push_back(static_cast<std::uint32_t>(rng.uniform_index(2)));
    }
  std::vector<std::uint32_t> rows(out_rows.size());
  for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto mask = keep_first(out_rows.size(), static_cast<std::size_t>(state.range(0)) * out_rows.size() / kBatch);
  const std::vector<double> seed(out_rows.size(), -1.0 / static_cast<double>(out_rows.size()));
  for (auto _ : state) {
    state.PauseTiming();
    Tape tape(0);
    const auto out = tf.forward(tape, tokens, T, out_rows);
    const Var lp = ops::pick(tape, out.log_probs, rows, targets);
    state.ResumeTiming();
    tape.backward(lp, seed, mask, {.dense = dense});
    benchmark::DoNotOptimize(tf.parameters().front()->grad.data().data());
  }
  state.counters["kept_pct"] = static_cast<double>(state.range(0));
}

void forward_only(benchmark::State& state) {
  Rng rng(1, Stream::kTest);
  MlpPolicy mlp({.inputs = 784, .hidden = 100, .hidden_layers = 2, .actions = 10}, rng);
  Tensor x({kBatch, 784});
  for (double& v : x.data()) v = rng.uniform();
  for (auto _ : state) {
    Tape tape(0);
    benchmark::DoNotOptimize(mlp.forward(tape, tape.input(x)));
  }
}

}  // namespace

BENCHMARK_CAPTURE(mlp_backward, skip_rows, false)->Arg(100)->Arg(30)->Arg(10)->Arg(3)->Arg(1);
BENCHMARK_CAPTURE(mlp_backward, dense, true)->Arg(100)->Arg(3);
BENCHMARK(forward_only);
BENCHMARK_CAPTURE(transformer_backward, skip_rows, false)->Arg(100)->Arg(10)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(transformer_backward, dense, true)->Arg(100)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
