#include <gtest/gtest.h>

#include <random>

#include "coreg/consensus.hpp"
#include "test_support.hpp"

namespace coreg {
namespace {

TEST(Fuse, ReferenceValues) {
  const FusionConfig cfg{0.1, 0.7, 1.0};
  EXPECT_NEAR(fuse_value(0.5, 0.0, cfg), 0.15, 1e-15);
  EXPECT_NEAR(fuse_value(0.5, 1.0, cfg), 0.6, 1e-15);
  EXPECT_NEAR(fuse_value(1.0, 1.0, cfg), 1.1, 1e-15);
  EXPECT_EQ(clip_unit(ScoreMap(1, 1, fuse_value(1.0, 1.0, cfg)))(0, 0), 1.0);
}

TEST(Fuse, NoGateWeightIsIdentity) {
  std::mt19937_64 rng(1);
  const auto d = testing::random_map(rng, 9, 9), g = testing::random_map(rng, 9, 9);
  EXPECT_EQ(fuse(d, g, {0.0, 0.0, 1.0}), d);
}

TEST(Fuse, ZeroDeltaIsAdditiveGate) {
  std::mt19937_64 rng(2);
  const auto g = testing::random_map(rng, 5, 5);
  const auto s = fuse(ScoreMap(5, 5, 0.0), g, {0.1, 0.7, 1.0});
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], 0.1 * g[i], 1e-15);
}

TEST(Fuse, MonotoneInDeltaAndGate) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const FusionConfig cfg{0.1, 0.7, 1.0};
  for (int i = 0; i < 20000; ++i) {
    const double d1 = u(rng), d2 = u(rng), g1 = u(rng), g2 = u(rng);
    EXPECT_LE(fuse_value(std::min(d1, d2), g1, cfg), fuse_value(std::max(d1, d2), g1, cfg));
    EXPECT_LE(fuse_value(d1, std::min(g1, g2), cfg), fuse_value(d1, std::max(g1, g2), cfg));
    const double clipped = std::clamp(fuse_value(d1, g1, cfg), 0.0, 1.0);
    EXPECT_GE(clipped, 0.0);
    EXPECT_LE(clipped, 1.0);
  }
}

TEST(AverageImage, MeanOfDates) {
  RgbImage a(1, 1, Rgb{10.f, 20.f, 30.f}), b(1, 1, Rgb{30.f, 40.f, 50.f});
  EXPECT_EQ(average_image(a, b)(0, 0), (Rgb{20.f, 30.f, 40.f}));
  EXPECT_THROW(average_image(a, RgbImage(2, 1)), Error);
}

TEST(RegionalPool, SingleRegionMean) {
  const ScoreMap s(1, 3, std::vector<double>{0.2, 0.4, 0.6});
  const auto out = regional_pool(s, LabelMap(1, 3, 0));
  for (double v : out) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(RegionalPool, SingletonRegionsAreIdentity) {
  std::mt19937_64 rng(4);
  const auto s = testing::random_map(rng, 6, 7);
  LabelMap labels(6, 7);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>(i);
  EXPECT_EQ(regional_pool(s, labels), s);
}

TEST(RegionalPool, PreservesRegionMassAndIsIdempotent) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int32_t> pick(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testing::random_map(rng, 12, 10);
    LabelMap labels(12, 10);
    for (auto& l : labels) l = pick(rng);
    for (std::int32_t r = 0; r < 6; ++r) labels[r] = r;  // every label present
    const auto pooled = regional_pool(s, labels);
    for (std::int32_t r = 0; r < 6; ++r) {
      double in = 0.0, out = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (labels[i] != r) continue;
        in += s[i];
        out += pooled[i];
        ++n;
      }
      EXPECT_NEAR(in / n, out / n, 1e-12);
    }
    double total_in = 0.0, total_out = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      total_in += s[i];
      total_out += pooled[i];
    }
    EXPECT_NEAR(total_in / s.size(), total_out / s.size(), 1e-9);
    EXPECT_EQ(regional_pool(pooled, labels), pooled);
    for (double v : pooled) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(RegionalPool, ShapeMismatch) {
  EXPECT_THROW(regional_pool(ScoreMap(2, 2), LabelMap(2, 3, 0)), Error);
}

}  // namespace
}  // namespace coreg
