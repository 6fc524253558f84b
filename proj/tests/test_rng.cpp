#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "kondo/rng.hpp"

using kondo::Rng;
using kondo::Stream;

// Known-answer vectors from the Random123 distribution (philox4x32_10).
TEST(Philox, KnownAnswerZero) {
  const auto out = kondo::philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = kondo::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = kondo::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(out, (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, SameSeedAndStreamRepeat) {
  Rng a(17, Stream::kEnv), b(17, Stream::kEnv);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreIndependentOfEachOthersUsage) {
  Rng gate(3, Stream::kGate);
  std::vector<std::uint64_t> expected;
  for (int i = 0; i < 50; ++i) expected.push_back(gate.next_u64());

  // Drawing heavily from the noise stream must not shift the gate stream.
  Rng noise(3, Stream::kNoise);
  for (int i = 0; i < 12345; ++i) noise.normal();
  Rng gate2(3, Stream::kGate);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(gate2.next_u64(), expected[i]);
}

TEST(Rng, DifferentStreamsDiffer) {
  Rng a(5, Stream::kEnv), b(5, Stream::kAction), c(6, Stream::kEnv);
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
}

TEST(Rng, SubstreamsAreDistinctAndReproducible) {
  Rng base(9, Stream::kTest);
  Rng s1 = base.substream(1), s1b = base.substream(1), s2 = base.substream(2);
  const auto v = s1.next_u64();
  EXPECT_EQ(v, s1b.next_u64());
  EXPECT_NE(v, s2.next_u64());
}

TEST(Rng, UniformMoments) {
  Rng rng(1, Stream::kTest);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng rng(2, Stream::kTest);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(4, Stream::kTest);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, CategoricalFollowsWeights) {
  Rng rng(8, Stream::kTest);
  const std::vector<double> w = {1.0, 0.0, 3.0};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 40000; ++i) ++counts[rng.categorical(w)];
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[0] / 40000.0, 0.25, 0.01);
}
