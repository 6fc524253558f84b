#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "kondo/credit.hpp"
#include "kondo/mlp_policy.hpp"
#include "kondo/rng.hpp"
#include "kondo/tape.hpp"

namespace kondo {

struct MnistSplit {
  Tensor images;  // [N, 784], pixels in [0, 1]
  std::vector<std::uint8_t> labels;
  std::size_t size() const { return labels.size(); }
};

enum class DataSource { kIdx, kSynthetic };

struct MnistDataset {
  MnistSplit train;
  MnistSplit test;
  DataSource source = DataSource::kSynthetic;
};

/// Reads an IDX image/label file pair. Pixels are scaled by 1/255.
MnistSplit load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Synthetic stand-in for MNIST with the same shapes.
///
/// Every class owns `styles` pen strokes, each a polyline through `points`
/// control points on the 28x28 grid, rendered with a soft brush. An example
/// redraws a stroke of its class with every control point jittered by
/// N(0, jitter^2) pixels, shifts it by up to `max_shift` pixels, scales its
/// intensity, blends in a stroke of a different class at weight up to
/// `max_blend`, adds iid pixel noise and clips to [0, 1]. The dataset is a
/// pure function of the spec.
struct SyntheticMnistSpec {
  std::size_t train_size = 60000;
  std::size_t test_size = 10000;
  std::uint64_t seed = 20240601;
  std::size_t styles = 3;
  std::size_t points = 5;
  double jitter = 1.0;
  int max_shift = 2;
  double max_blend = 0.2;
  double pixel_noise = 0.1;
};
MnistDataset make_synthetic_mnist(const SyntheticMnistSpec& spec);
/// Memoized make_synthetic_mnist; the result is shared read-only.
std::shared_ptr<const MnistDataset> shared_synthetic_mnist(const SyntheticMnistSpec& spec);

/// B indices drawn uniformly with replacement from [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t batch, Rng& rng);

/// One bandit round on a batch of training images.
struct MnistStep {
  explicit MnistStep(std::int64_t step = 0) : tape(step) {}

  Tape tape;
  Var log_probs;  // [B, 10] log-softmax node
  Tensor logits;
  std::vector<std::size_t> actions;
  std::vector<std::size_t> labels;
  std::vector<double> rewards;  // observed, after reward noise
  std::vector<Sample> samples;
  double mean_reward = 0.0;
  double train_error = 0.0;  // fraction of sampled actions that are wrong
};

/// Forward pass, action sampling, reward 1{a == y} plus reward noise and
/// gamble noise (whenever the chosen action is the gamble action), credit
/// with the configured baseline, and screening noise.
MnistStep mnist_step(MlpPolicy& policy, const MnistSplit& data, std::span<const std::size_t> indices,
                     const BaselineSpec& baseline, const NoiseSpec& noise, Rng& action_rng, Rng& noise_rng,
                     ComputeMeter* meter, std::int64_t step = 0);

/// Argmax-policy error over the whole split.
double evaluate_error(const MlpPolicy& policy, const MnistSplit& data);

}  // namespace kondo
