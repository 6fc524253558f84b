#include "kondo/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "kondo/chart.hpp"
#include "kondo/idx.hpp"
#include "kondo/learners.hpp"
#include "kondo/proofs.hpp"
#include "kondo/reversal_env.hpp"
#include "kondo/scaling.hpp"

namespace kondo {

namespace {

std::string derive_test_path(const std::string& train_path, const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  std::filesystem::path p(train_path);
  std::string name = p.filename().string();
  const auto pos = name.find("train");
  if (pos == std::string::npos)
    throw ConfigError("mnist.test_images_path", "required when the training file name has no 'train' in it");
  name.replace(pos, 5, "t10k");
  return (p.parent_path() / name).string();
}

// Accumulates per-step statistics between two logged rows.
struct Interval {
  double error = 0.0;
  double rate = 0.0;
  std::size_t steps = 0;
  void add(double e, double r) {
    error += e;
    rate += r;
    ++steps;
  }
};

using Clock = std::chrono::steady_clock;

MetricsRow make_row(const RunTrace& t, std::int64_t step, const ComputeMeter& meter, const Interval& iv,
                    const UpdateReport& last, double test_error, bool wallclock, Clock::time_point start) {
  MetricsRow r;
  r.method = t.method;
  r.seed = t.seed;
  r.step = step;
  r.forward_samples = meter.forward_samples();
  r.backward_samples = meter.backward_samples();
  r.train_error = iv.error / static_cast<double>(iv.steps);
  r.test_error = test_error;
  r.eff_gate_rate = iv.rate / static_cast<double>(iv.steps);
  r.lambda = last.gate.lambda;
  r.wallclock = wallclock ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
  r.kept = last.gate.kept;
  r.skipped = last.gate.skipped;
  return r;
}

void check_accounting(const UpdateReport& rep, const ComputeMeter& meter) {
  if (rep.backward_samples != rep.kept) throw std::logic_error("backward count differs from kept count");
  if (meter.backward_samples() > meter.forward_samples())
    throw std::logic_error("backward samples exceed forward samples");
}

void record(RunTrace& t, double reward, const ComputeMeter& meter) {
  t.step_reward.push_back(reward);
  t.step_forward.push_back(meter.forward_samples());
  t.step_backward.push_back(meter.backward_samples());
}

}  // namespace

std::shared_ptr<const MnistDataset> load_mnist(const MnistSettings& s) {
  if (s.synthetic) return shared_synthetic_mnist(s.synthetic_spec);
  auto ds = std::make_shared<MnistDataset>();
  ds->train = load_idx(s.images_path, s.labels_path);
  ds->test = load_idx(derive_test_path(s.images_path, s.test_images_path),
                      derive_test_path(s.labels_path, s.test_labels_path));
  ds->source = DataSource::kIdx;
  return ds;
}

RunTrace train_mnist(const RunConfig& config, const MethodSpec& method, std::uint64_t seed,
                     const MnistDataset& data) {
  RunTrace t;
  t.method = method.label;
  t.seed = seed;
  const auto start = Clock::now();

  Rng init(seed, Stream::kPolicyInit), env(seed, Stream::kEnv), action(seed, Stream::kAction),
      gate(seed, Stream::kGate), noise(seed, Stream::kNoise);
  MlpConfig mc = config.mlp;
  mc.inputs = data.train.images.cols();
  mc.actions = 10;
  MlpPolicy policy(mc, init);
  Adam adam({.lr = method.algo.lr});
  ComputeMeter meter(config.cost_ratio);

  MnistSplit eval_subset;
  const MnistSplit* eval = &data.test;
  if (config.mnist.eval_size > 0 && config.mnist.eval_size < data.test.size()) {
    const std::size_t n = config.mnist.eval_size, d = data.test.images.cols();
    eval_subset.images = Tensor({n, d});
    std::copy_n(data.test.images.data().begin(), n * d, eval_subset.images.data().begin());
    eval_subset.labels.assign(data.test.labels.begin(), data.test.labels.begin() + static_cast<std::ptrdiff_t>(n));
    eval = &eval_subset;
  }

  Interval iv;
  UpdateReport last;
  for (std::int64_t step = 1; step <= config.steps; ++step) {
    const auto idx = sample_indices(data.train.size(), method.algo.batch_size, env);
    auto ms = mnist_step(policy, data.train, idx, config.baseline, config.noise, action, noise, &meter, step);
    if (config.debug_checks) check_sign_consistency(ms.samples);
    TapeScoreTarget target(ms.tape, ms.log_probs, ms.actions, policy.parameters());
    last = update(method.algo, ms.samples, target, adam, gate, &meter, config.noise.in_update);
    check_accounting(last, meter);
    record(t, 1.0 - ms.train_error, meter);
    iv.add(ms.train_error, last.gate.eff_rate);

    if (config.gate_dump.count > 0 && step >= config.gate_dump.start &&
        step < config.gate_dump.start + config.gate_dump.count) {
      for (const Sample& s : ms.samples)
        if (!std::isnan(s.pi_star)) t.gate_rows.push_back({t.method, seed, step, s.kept, s.pi_star});
    }
    if (step % config.eval_interval == 0 || step == config.steps) {
      t.rows.push_back(make_row(t, step, meter, iv, last, evaluate_error(policy, *eval), config.record_wallclock,
                                start));
      iv = {};
    }
  }
  t.final_forward = meter.forward_samples();
  t.final_backward = meter.backward_samples();
  return t;
}

RunTrace train_reversal(const RunConfig& config, const MethodSpec& method, std::uint64_t seed) {
  RunTrace t;
  t.method = method.label;
  t.seed = seed;
  const auto start = Clock::now();

  Rng init(seed, Stream::kPolicyInit), env(seed, Stream::kEnv), action(seed, Stream::kAction),
      gate(seed, Stream::kGate), eval_rng(seed, Stream::kEval);
  TransformerConfig tc = config.transformer;
  tc.vocab = config.reversal.vocab;
  TransformerPolicy policy(tc, init);
  Adam adam({.lr = method.algo.lr});
  ComputeMeter meter(config.cost_ratio);

  ReversalSpec eval_spec = config.reversal;
  eval_spec.prompts = config.eval_prompts;
  const auto eval_prompts = draw_prompts(eval_spec, eval_rng);

  Interval iv;
  UpdateReport last;
  for (std::int64_t step = 1; step <= config.steps; ++step) {
    auto rs = reversal_step(policy, config.reversal, config.baseline, env, action, &meter);
    if (config.debug_checks) check_sign_consistency(rs.samples);
    ReversalScoreTarget target(policy, rs.rollout, step);
    last = update(method.algo, rs.samples, target, adam, gate, &meter, false);
    check_accounting(last, meter);
    record(t, rs.mean_reward, meter);
    iv.add(1.0 - rs.mean_reward, last.gate.eff_rate);
    if (step % config.eval_interval == 0 || step == config.steps) {
      const double test_error =
          eval_prompts.empty() ? 0.0 : 1.0 - greedy_reward(policy, eval_prompts, config.reversal.length);
      t.rows.push_back(make_row(t, step, meter, iv, last, test_error, config.record_wallclock, start));
      iv = {};
    }
  }
  t.final_forward = meter.forward_samples();
  t.final_backward = meter.backward_samples();
  return t;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<RunTrace> run_training(const RunConfig& config) {
  const bool mnist = config.kind == ExperimentKind::kMnist;
  if (!mnist && config.kind != ExperimentKind::kReversal)
    throw std::invalid_argument("run_training handles mnist and reversal configs");
  std::shared_ptr<const MnistDataset> data;
  if (mnist) data = load_mnist(config.mnist);
  const std::size_t S = config.seeds.size();
  std::vector<RunTrace> traces(config.methods.size() * S);
  parallel_for(traces.size(), config.workers, [&](std::size_t job) {
    const auto& m = config.methods[job / S];
    const auto seed = config.seeds[job % S];
    traces[job] = mnist ? train_mnist(config, m, seed, *data) : train_reversal(config, m, seed);
  });
  return traces;
}

void write_gate_csv(const std::filesystem::path& path, std::span<const GateDumpRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,seed,step,kept,pi_star\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.seed << ',' << r.step << ',' << (r.kept ? 1 : 0) << ',' << format_double(r.pi_star)
        << '\n';
}

void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, std::span<const RunTrace> traces) {
  std::filesystem::create_directories(dir / "charts");
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << to_json(config).dump(2) << '\n';
  }
  std::vector<MetricsRow> all;
  for (const auto& t : traces) {
    const std::string stem = t.method + "_" + std::to_string(t.seed);
    write_metrics_csv(dir / ("metrics_" + stem + ".csv"), t.rows);
    if (!t.gate_rows.empty()) write_gate_csv(dir / ("gate_" + stem + ".csv"), t.gate_rows);
    all.insert(all.end(), t.rows.begin(), t.rows.end());
  }
  write_summary_csv(dir / "summary.csv", summarize(all));
  if (all.empty()) return;
  const std::string y = "test_error";
  struct View {
    const char* file;
    const char* x;
    bool log_x;
  };
  for (const View v : {View{"test_error_vs_step.svg", "step", false},
                       View{"test_error_vs_forward.svg", "forward_samples", true},
                       View{"test_error_vs_backward.svg", "backward_samples", true}}) {
    const auto series = series_from_metrics(all, v.x, y);
    const ChartSpec spec{.title = to_string(config.kind) + ": " + y, .x_label = v.x, .y_label = y, .log_x = v.log_x};
    try {
      std::ofstream(dir / "charts" / v.file, std::ios::binary) << render_svg(series, spec);
    } catch (const std::invalid_argument&) {
      // Nothing plottable on this view (e.g. no backward passes on a log axis).
    }
  }
}

namespace {

std::string grid_dir_name(const std::string& key, const nlohmann::json& value) {
  std::string v = value.is_string() ? value.get<std::string>() : value.dump();
  std::string out = key + "=" + v;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' || c == '=')) c = '_';
  return out;
}

}  // namespace

void run(const RunConfig& config, const nlohmann::json& document) {
  const std::filesystem::path dir = config.output_dir;
  switch (config.kind) {
    case ExperimentKind::kMnist:
    case ExperimentKind::kReversal: {
      const auto traces = run_training(config);
      write_run_outputs(dir, config, traces);
      return;
    }
    case ExperimentKind::kBanditGeometry: {
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "config.json", std::ios::binary) << to_json(config).dump(2) << '\n';
      for (const char* name : {"lemma1", "prop1", "prop2"}) prove(name, dir);
      return;
    }
    case ExperimentKind::kBanditGambling: {
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "config.json", std::ios::binary) << to_json(config).dump(2) << '\n';
      prove("prop3", dir);
      return;
    }
    case ExperimentKind::kSweepRate:
    case ExperimentKind::kSweepLr:
    case ExperimentKind::kSweepNoise: {
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "config.json", std::ios::binary) << to_json(config).dump(2) << '\n';
      for (const auto& value : config.sweep.values) {
        nlohmann::json doc = document;
        doc["kind"] = config.sweep.base;
        doc.erase("sweep");
        set_path(doc, config.sweep.key, value);
        RunConfig point = parse_config(doc);
        point.output_dir = (dir / grid_dir_name(config.sweep.key, value)).string();
        write_run_outputs(point.output_dir, point, run_training(point));
      }
      return;
    }
    case ExperimentKind::kSweepScaling: {
      std::filesystem::create_directories(dir / "charts");
      std::ofstream(dir / "config.json", std::ios::binary) << to_json(config).dump(2) << '\n';
      const auto results = scaling_sweep(config, document);
      write_scaling_csv(dir / "scaling.csv", results);
      std::vector<ChartSeries> avg, fin;
      for (const auto& r : results) {
        ChartSeries a{r.method, {}, {}}, f{r.method, {}, {}};
        for (const auto& p : r.points) {
          a.x.push_back(p.value);
          a.y.push_back(p.average_error);
          f.x.push_back(p.value);
          f.y.push_back(p.final_error);
        }
        avg.push_back(std::move(a));
        fin.push_back(std::move(f));
      }
      const std::string axis = results.empty() ? "value" : results.front().axis;
      try {
        std::ofstream(dir / "charts" / "average_error.svg", std::ios::binary)
            << render_svg(avg, {.title = "average error", .x_label = axis, .y_label = "1 - mean reward",
                                .log_x = true, .log_y = true});
        std::ofstream(dir / "charts" / "final_error.svg", std::ios::binary)
            << render_svg(fin, {.title = "final error", .x_label = axis, .y_label = "1 - final reward",
                                .log_x = true, .log_y = true});
      } catch (const std::invalid_argument&) {
      }
      return;
    }
  }
}

}  // namespace kondo
