#include "kondo/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace kondo {

ScalingPoint scaling_point(double value, std::span<const RunTrace> seeds) {
  ScalingPoint p;
  p.value = value;
  if (seeds.empty()) return p;
  const std::size_t steps = seeds.front().step_reward.size();
  std::vector<double> reward(steps, 0.0), forward(steps, 0.0), backward(steps, 0.0);
  for (const auto& t : seeds) {
    if (t.step_reward.size() != steps) throw std::invalid_argument("scaling_point: runs differ in length");
    for (std::size_t i = 0; i < steps; ++i) {
      reward[i] += t.step_reward[i];
      forward[i] += static_cast<double>(t.step_forward[i]);
      backward[i] += static_cast<double>(t.step_backward[i]);
    }
  }
  const double n = static_cast<double>(seeds.size());
  for (std::size_t i = 0; i < steps; ++i) {
    reward[i] /= n;
    forward[i] /= n;
    backward[i] /= n;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    total += reward[i];
    if (p.solve_step < 0 && is_solved(total / static_cast<double>(i + 1))) {
      p.solve_step = static_cast<std::int64_t>(i + 1);
      p.solve_forward = static_cast<std::uint64_t>(std::llround(forward[i]));
      p.solve_backward = static_cast<std::uint64_t>(std::llround(backward[i]));
    }
  }
  p.mean_reward = steps ? total / static_cast<double>(steps) : 0.0;
  const std::size_t window = std::max<std::size_t>(1, steps / 10);
  double tail = 0.0;
  for (std::size_t i = steps - std::min(window, steps); i < steps; ++i) tail += reward[i];
  p.trailing_reward = steps ? tail / static_cast<double>(std::min(window, steps)) : 0.0;
  p.solved = is_solved(p.mean_reward);
  p.solved_trailing = is_solved(p.trailing_reward);
  p.average_error = 1.0 - p.mean_reward;
  p.final_error = 1.0 - p.trailing_reward;
  if (steps) {
    p.forward_total = static_cast<std::uint64_t>(std::llround(forward.back()));
    p.backward_total = static_cast<std::uint64_t>(std::llround(backward.back()));
  }
  return p;
}

double star_within_budget(const ScalingResult& result, std::uint64_t budget, bool backward) {
  double star = 0.0;
  for (const auto& p : result.points) {
    if (p.solve_step < 0) continue;
    const auto spent = backward ? p.solve_backward : p.solve_forward;
    if (spent <= budget) star = std::max(star, p.value);
  }
  return star;
}

std::vector<ScalingResult> scaling_sweep(const RunConfig& config, const nlohmann::json& document) {
  const std::string& key = config.sweep.key;
  std::string axis;
  if (key == "reversal.vocab") axis = "vocab";
  else if (key == "reversal.length") axis = "length";
  else throw ConfigError("sweep.key", "scaling sweeps use reversal.vocab or reversal.length");

  std::vector<double> grid;
  for (const auto& v : config.sweep.values) {
    if (!v.is_number()) throw ConfigError("sweep.values", "scaling grid values must be numbers");
    grid.push_back(v.get<double>());
  }
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("sweep.values", "grid must be sorted ascending");

  // One concrete reversal config per grid value.
  std::vector<RunConfig> point_configs;
  for (const auto& v : config.sweep.values) {
    nlohmann::json doc = document;
    doc["kind"] = "reversal";
    doc.erase("sweep");
    set_path(doc, key, v);
    RunConfig pc = parse_config(doc);
    const std::size_t need = 2 * pc.reversal.length;
    if (pc.transformer.max_len < need) pc.transformer.max_len = need;
    point_configs.push_back(std::move(pc));
  }

  const std::size_t M = config.methods.size(), G = grid.size(), S = config.seeds.size();
  std::vector<RunTrace> traces(M * G * S);
  parallel_for(traces.size(), config.workers, [&](std::size_t job) {
    const std::size_t m = job / (G * S), g = (job / S) % G, s = job % S;
    traces[job] = train_reversal(point_configs[g], point_configs[g].methods[m], config.seeds[s]);
  });

  std::vector<ScalingResult> out;
  for (std::size_t m = 0; m < M; ++m) {
    ScalingResult r;
    r.axis = axis;
    r.method = config.methods[m].label;
    for (std::size_t g = 0; g < G; ++g) {
      const std::span<const RunTrace> seeds(traces.data() + (m * G + g) * S, S);
      r.points.push_back(scaling_point(grid[g], seeds));
      if (r.points.back().solved) r.star = std::max(r.star, grid[g]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_scaling_csv(const std::filesystem::path& path, std::span<const ScalingResult> results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,axis,value,solved,solved_trailing,mean_reward,trailing_reward,average_error,final_error,"
         "forward_total,backward_total,solve_step,solve_forward,solve_backward,star\n";
  for (const auto& r : results) {
    for (const auto& p : r.points) {
      out << r.method << ',' << r.axis << ',' << format_double(p.value) << ',' << p.solved << ','
          << p.solved_trailing << ',' << format_double(p.mean_reward) << ',' << format_double(p.trailing_reward)
          << ',' << format_double(p.average_error) << ',' << format_double(p.final_error) << ','
          << p.forward_total << ',' << p.backward_total << ',' << p.solve_step << ',' << p.solve_forward << ','
          << p.solve_backward << ',' << format_double(r.star) << '\n';
    }
  }
}

}  // namespace kondo
