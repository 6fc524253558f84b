#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace kondo {

/// Philox4x32-10 counter-based block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Named substreams. Each (seed, stream) pair is an independent sequence, so
/// drawing more from one stream never shifts another.
enum class Stream : std::uint32_t {
  kPolicyInit = 1,
  kEnv = 2,
  kAction = 3,
  kGate = 4,
  kNoise = 5,
  kEval = 6,
  kData = 7,
  kTest = 99,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, Stream stream) : Rng(seed, static_cast<std::uint32_t>(stream)) {}
  Rng(std::uint64_t seed, std::uint32_t stream);

  /// Child stream keyed by an extra index (e.g. a grid point or a worker).
  Rng substream(std::uint32_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kondo
