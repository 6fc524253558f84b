#include "kondo/mnist_env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "kondo/idx.hpp"
#include "kondo/sampling.hpp"

namespace kondo {

MnistSplit load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto img = read_idx_images(images_path);
  auto labels = read_idx_labels(labels_path);
  if (img.count != labels.size())
    throw IdxDimensionError("image count " + std::to_string(img.count) + " does not match label count " +
                            std::to_string(labels.size()));
  for (auto l : labels)
    if (l > 9) throw IdxError(labels_path.string() + ": label out of range");
  MnistSplit split;
  split.images = Tensor({img.count, img.rows * img.cols});
  auto dst = split.images.data();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = img.pixels[i] / 255.0;
  split.labels = std::move(labels);
  return split;
}

namespace {

constexpr int kSide = 28;
constexpr std::size_t kPixels = kSide * kSide;
constexpr std::size_t kClasses = 10;

using Stroke = std::vector<std::pair<double, double>>;

constexpr double kBrush = 1.1;

Stroke make_stroke(std::size_t points, Rng& rng) {
  Stroke s;
  for (std::size_t k = 0; k < points; ++k) s.emplace_back(5.0 + 18.0 * rng.uniform(), 5.0 + 18.0 * rng.uniform());
  return s;
}

// Soft brush: intensity exp(-d^2 / (2 w^2)) in the distance to the polyline.
void render(const Stroke& stroke, double weight, int shift_x, int shift_y, std::span<double> img) {
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const double px = x - shift_x, py = y - shift_y;
      double best = 1e300;
      for (std::size_t k = 0; k + 1 < stroke.size(); ++k) {
        const auto [ax, ay] = stroke[k];
        const auto [bx, by] = stroke[k + 1];
        const double vx = bx - ax, vy = by - ay;
        const double len2 = vx * vx + vy * vy;
        const double t = len2 > 0.0 ? std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0) : 0.0;
        const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
        best = std::min(best, dx * dx + dy * dy);
      }
      img[y * kSide + x] += weight * std::exp(-0.5 * best / (kBrush * kBrush));
    }
  }
}

MnistSplit make_split(const std::vector<Stroke>& protos, const SyntheticMnistSpec& spec, std::size_t n, Rng& rng) {
  MnistSplit split;
  split.images = Tensor({n, kPixels});
  split.labels.resize(n);
  const int span = 2 * spec.max_shift + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(rng.uniform_index(kClasses));
    Stroke stroke = protos[label * spec.styles + rng.uniform_index(spec.styles)];
    for (auto& [x, y] : stroke) {
      x += spec.jitter * rng.normal();
      y += spec.jitter * rng.normal();
    }
    std::size_t other_class = rng.uniform_index(kClasses - 1);
    if (other_class >= label) ++other_class;
    const Stroke& other = protos[other_class * spec.styles + rng.uniform_index(spec.styles)];
    const double blend = spec.max_blend * rng.uniform();
    const double scale = 0.7 + 0.3 * rng.uniform();
    const int sx = static_cast<int>(rng.uniform_index(span)) - spec.max_shift;
    const int sy = static_cast<int>(rng.uniform_index(span)) - spec.max_shift;
    auto row = split.images.row(i);
    render(stroke, scale * (1.0 - blend), sx, sy, row);
    if (blend > 0.0) render(other, scale * blend, sx, sy, row);
    for (double& v : row) v = std::clamp(v + spec.pixel_noise * rng.normal(), 0.0, 1.0);
    split.labels[i] = static_cast<std::uint8_t>(label);
  }
  return split;
}

}  // namespace

MnistDataset make_synthetic_mnist(const SyntheticMnistSpec& spec) {
  if (spec.styles == 0 || spec.points < 2) throw std::invalid_argument("synthetic mnist needs styles and >= 2 points");
  Rng rng(spec.seed, Stream::kData);
  std::vector<Stroke> protos;
  for (std::size_t i = 0; i < kClasses * spec.styles; ++i) protos.push_back(make_stroke(spec.points, rng));
  Rng train_rng = rng.substream(1);
  Rng test_rng = rng.substream(2);
  MnistDataset ds;
  ds.train = make_split(protos, spec, spec.train_size, train_rng);
  ds.test = make_split(protos, spec, spec.test_size, test_rng);
  ds.source = DataSource::kSynthetic;
  return ds;
}

std::shared_ptr<const MnistDataset> shared_synthetic_mnist(const SyntheticMnistSpec& spec) {
  using Key =
      std::tuple<std::size_t, std::size_t, std::uint64_t, std::size_t, std::size_t, double, int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const MnistDataset>> cache;
  const Key key{spec.train_size, spec.test_size, spec.seed,      spec.styles,     spec.points,
                spec.jitter,     spec.max_shift, spec.max_blend, spec.pixel_noise};
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ds = std::make_shared<const MnistDataset>(make_synthetic_mnist(spec));
  cache.emplace(key, ds);
  return ds;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t batch, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_indices: empty dataset");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.uniform_index(n);
  return idx;
}

MnistStep mnist_step(MlpPolicy& policy, const MnistSplit& data, std::span<const std::size_t> indices,
                     const BaselineSpec& baseline, const NoiseSpec& noise, Rng& action_rng, Rng& noise_rng,
                     ComputeMeter* meter, std::int64_t step) {
  const std::size_t B = indices.size();
  const std::size_t D = data.images.cols();
  Tensor x({B, D});
  for (std::size_t i = 0; i < B; ++i) {
    if (indices[i] >= data.size()) throw std::out_of_range("mnist_step: index out of range");
    std::copy_n(data.images.row(indices[i]).begin(), D, x.row(i).begin());
  }

  MnistStep out(step);
  const Var xin = out.tape.input(std::move(x));
  const Var logits = policy.forward(out.tape, xin, meter);
  out.log_probs = ops::log_softmax(out.tape, logits);
  out.logits = out.tape.value(logits);

  out.actions.resize(B);
  out.labels.resize(B);
  out.rewards.resize(B);
  double correct = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    out.actions[i] = sample_action(out.logits.row(i), action_rng).action;
    out.labels[i] = data.labels[indices[i]];
    out.rewards[i] = out.actions[i] == out.labels[i] ? 1.0 : 0.0;
    correct += out.rewards[i];
  }
  perturb_rewards(out.rewards, out.actions, noise, noise_rng);

  Tensor screen_logits;
  const bool noisy_logits = noise.logit > 0.0;
  if (noisy_logits) screen_logits = perturb_logits(out.logits, noise.logit, noise_rng);
  out.samples = compute_credit(out.logits, out.actions, out.rewards, out.labels, baseline,
                               noisy_logits ? &screen_logits : nullptr);
  perturb_delight(out.samples, noise, noise_rng);

  double reward_sum = 0.0;
  for (double r : out.rewards) reward_sum += r;
  out.mean_reward = reward_sum / static_cast<double>(B);
  out.train_error = 1.0 - correct / static_cast<double>(B);
  return out;
}

double evaluate_error(const MlpPolicy& policy, const MnistSplit& data) {
  const std::size_t n = data.size();
  const std::size_t D = data.images.cols();
  constexpr std::size_t kChunk = 1000;
  std::size_t wrong = 0;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    Tensor x({m, D});
    std::copy_n(data.images.row(start).begin(), m * D, x.data().begin());
    const Tensor z = policy.logits(x);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = z.row(i);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best != data.labels[start + i]) ++wrong;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(n);
}

}  // namespace kondo
