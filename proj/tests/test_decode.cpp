#include <gtest/gtest.h>

#include <random>

#include "coreg/decode.hpp"
#include "test_support.hpp"

namespace coreg {
namespace {

// Direct (non-separable) square-window morphology; pixels outside are ignored.
BinaryMask brute_morph(const BinaryMask& in, int r, bool dilate) {
  const int h = static_cast<int>(in.height()), w = static_cast<int>(in.width());
  BinaryMask out(in.height(), in.width());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any = false, all = true;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          any = any || in(yy, xx);
          all = all && in(yy, xx);
        }
      }
      out(y, x) = dilate ? any : all;
    }
  }
  return out;
}

TEST(Threshold, BoundaryValues) {
  auto y0 = [](double v) { return quantize_and_threshold(ScoreMap(1, 1, v), 127)(0, 0); };
  EXPECT_EQ(y0(128.0 / 255.0), 1);
  EXPECT_EQ(y0(127.0 / 255.0), 0);
  EXPECT_EQ(y0(0.5), 0);  // floor(127.5) = 127
  EXPECT_EQ(y0(1.0), 1);
  EXPECT_EQ(y0(0.0), 0);
  EXPECT_EQ(quantize_and_threshold(ScoreMap(1, 1, 0.0), 0)(0, 0), 0);
  EXPECT_EQ(quantize_and_threshold(ScoreMap(1, 1, 1.0), 255)(0, 0), 0);
}

TEST(Threshold, MonotoneInTau) {
  std::mt19937_64 rng(1);
  const auto s = testing::random_map(rng, 16, 16);
  for (int tau = 0; tau < 255; ++tau) {
    const auto lo = quantize_and_threshold(s, tau), hi = quantize_and_threshold(s, tau + 1);
    for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_GE(lo[i], hi[i]);
  }
}

TEST(Morphology, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_mask(rng, 13, 17, 0.4);
    for (int r = 0; r <= 3; ++r) {
      EXPECT_EQ(erode(m, r), brute_morph(m, r, false));
      EXPECT_EQ(dilate(m, r), brute_morph(m, r, true));
    }
  }
}

TEST(StructFilter, RemovesSpeckle) {
  BinaryMask m(64, 64, 0);
  m(10, 10) = 1;
  m(40, 50) = 1;
  DecodeConfig cfg;
  for (auto v : struct_filter(m, cfg)) EXPECT_EQ(v, 0);
}

TEST(StructFilter, KeepsSolidSquare) {
  BinaryMask m(64, 64, 0);
  for (std::size_t y = 20; y < 40; ++y) {
    for (std::size_t x = 20; x < 40; ++x) m(y, x) = 1;
  }
  DecodeConfig cfg;
  cfg.min_component_area = 32;
  EXPECT_EQ(struct_filter(m, cfg), m);
}

TEST(StructFilter, ComponentThresholdIsStrict) {
  BinaryMask m(20, 20, 0);
  for (std::size_t y = 2; y < 6; ++y) {
    for (std::size_t x = 2; x < 10; ++x) m(y, x) = 1;  // 32 pixels
  }
  EXPECT_EQ(remove_small_components(m, 32), m);
  for (auto v : remove_small_components(m, 33)) EXPECT_EQ(v, 0);
}

TEST(StructFilter, DiagonalPixelsAreConnected) {
  BinaryMask m(5, 5, 0);
  for (std::size_t i = 0; i < 5; ++i) m(i, i) = 1;
  EXPECT_EQ(remove_small_components(m, 5), m);
  for (auto v : remove_small_components(m, 6)) EXPECT_EQ(v, 0);
}

TEST(StructFilter, AllZeroParametersAreIdentity) {
  std::mt19937_64 rng(3);
  DecodeConfig cfg{127, 0, 0, 0};
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = testing::random_mask(rng, 30, 30);
    EXPECT_EQ(struct_filter(m, cfg), m);
  }
}

TEST(StructFilter, MatchesBruteForcePipeline) {
  std::mt19937_64 rng(4);
  DecodeConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = testing::random_mask(rng, 40, 40, 0.55);
    const auto opened = brute_morph(brute_morph(m, 1, false), 1, true);
    const auto closed = brute_morph(brute_morph(opened, 1, true), 1, false);
    EXPECT_EQ(struct_filter(m, cfg), remove_small_components(closed, cfg.resolved_min_area(40, 40)));
  }
}

TEST(StructFilter, Idempotent) {
  std::mt19937_64 rng(5);
  DecodeConfig cfg;
  cfg.min_component_area = 8;
  for (int trial = 0; trial < 20; ++trial) {
    const auto once = struct_filter(testing::random_mask(rng, 48, 48, 0.5), cfg);
    EXPECT_EQ(struct_filter(once, cfg), once);
  }
}

TEST(DecodeConfig, AreaScaling) {
  DecodeConfig cfg;
  EXPECT_EQ(cfg.resolved_min_area(512, 512), 32u);
  EXPECT_EQ(cfg.resolved_min_area(1024, 1024), 128u);
  EXPECT_EQ(cfg.resolved_min_area(64, 64), 1u);
  EXPECT_EQ(cfg.resolved_min_area(256, 256), 8u);
  cfg.tau_u8 = 256;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace coreg
