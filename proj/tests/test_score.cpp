#include <gtest/gtest.h>

#include <random>

#include "coreg/score.hpp"
#include "test_support.hpp"

namespace coreg {
namespace {

InstanceRecord instance(double conf, Plane<float> mask = Plane<float>(1, 1, 1.0f)) { return {std::move(mask), conf}; }

TEST(FilterInstances, ThresholdAndOrder) {
  const auto kept = filter_instances({instance(0.9), instance(0.4), instance(0.7)}, {0.5, 30});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].confidence, 0.9);
  EXPECT_EQ(kept[1].confidence, 0.7);
}

TEST(FilterInstances, EmptyInput) { EXPECT_TRUE(filter_instances({}, {0.5, 30}).empty()); }

TEST(FilterInstances, TruncatesStablyToTopR) {
  std::vector<InstanceRecord> in;
  for (int i = 0; i < 40; ++i) in.push_back(instance(0.9, Plane<float>(1, 1, static_cast<float>(i))));
  const auto kept = filter_instances(in, {0.5, 30});
  ASSERT_EQ(kept.size(), 30u);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(kept[i].mask(0, 0), static_cast<float>(i));
}

TEST(FilterInstances, ThresholdIsInclusive) {
  EXPECT_EQ(filter_instances({instance(0.5)}, {0.5, 30}).size(), 1u);
}

TEST(UpsampleBilinear, ConstantStaysConstant) {
  const Plane<float> g(3, 5, 0.7f);
  for (auto [h, w] : {std::pair{7, 9}, {1, 1}, {64, 3}}) {
    const auto out = upsample_bilinear(g, h, w);
    for (double v : out) EXPECT_NEAR(v, 0.7, 1e-7);
  }
}

TEST(UpsampleBilinear, SinglePixelToFourByFour) {
  const auto out = upsample_bilinear(Plane<float>(1, 1, 0.3f), 4, 4);
  for (double v : out) EXPECT_DOUBLE_EQ(v, static_cast<double>(0.3f));
}

TEST(UpsampleBilinear, HalfPixelConvention) {
  const auto out = upsample_bilinear(Plane<float>(1, 2, std::vector<float>{0.f, 1.f}), 1, 4);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(out(0, 2), 0.75);
  EXPECT_DOUBLE_EQ(out(0, 3), 1.0);
}

TEST(UpsampleBilinear, MatchesReferenceResampler) {
  // cv2.resize(g, (4, 5), interpolation=INTER_LINEAR) on float32 input.
  const Plane<float> g(2, 3, std::vector<float>{0.0f, 0.5f, 1.0f, 0.2f, 0.9f, 0.4f});
  const double expected[5][4] = {{0.0, 0.3125, 0.6875, 1.0},
                                 {0.02, 0.345, 0.69, 0.94},
                                 {0.1, 0.475, 0.7, 0.7},
                                 {0.18, 0.605, 0.71, 0.46},
                                 {0.2, 0.6375, 0.7125, 0.4}};
  const auto out = upsample_bilinear(g, 5, 4);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(out(y, x), expected[y][x], 1e-6) << y << "," << x;
  }
}

TEST(UpsampleBilinear, ZeroDimensionRejected) {
  EXPECT_THROW(upsample_bilinear(Plane<float>(), 4, 4), Error);
  EXPECT_THROW(upsample_bilinear(Plane<float>(2, 2), 0, 4), Error);
}

TEST(ConceptScore, ScalarCase) {
  // conf 0.9, mask 0.5, dense 0.3 -> max(0.45, 0.3)
  const auto s = build_concept_score({instance(0.9, Plane<float>(1, 1, 0.5f))}, Plane<float>(1, 1, 0.3f), 1, 1);
  EXPECT_NEAR(s(0, 0), 0.45, 1e-12);
}

TEST(ConceptScore, EmptyEverythingIsZero) {
  const auto s = build_concept_score({}, std::nullopt, 5, 6);
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(ConceptScore, DenseOnly) {
  const auto s = build_concept_score({}, Plane<float>(2, 2, 0.6f), 2, 2);
  for (double v : s) EXPECT_DOUBLE_EQ(v, static_cast<double>(0.6f));
}

// Per-pixel brute force: evaluates the bilinear weights at every output pixel
// straight from the coordinate mapping, independent of the tap tables.
double bilinear_at(const Plane<float>& g, std::size_t h, std::size_t w, std::size_t y, std::size_t x) {
  auto coord = [](std::size_t d, std::size_t n_src, std::size_t n_dst) {
    double s = (d + 0.5) * (double(n_src) / double(n_dst)) - 0.5;
    if (s < 0) s = 0;
    if (s > double(n_src - 1)) s = double(n_src - 1);
    return s;
  };
  const double sy = coord(y, g.height(), h), sx = coord(x, g.width(), w);
  const std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
  const std::size_t y1 = y0 + 1 < g.height() ? y0 + 1 : y0, x1 = x0 + 1 < g.width() ? x0 + 1 : x0;
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x1)) + fy * ((1 - fx) * g(y1, x0) + fx * g(y1, x1));
}

TEST(ScoreStack, MatchesBruteForceLoop) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  const std::size_t h = 17, w = 23, k_count = 3;
  DateEvidence ev;
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<InstanceRecord> list;
    for (int i = 0; i < 5; ++i) {
      Plane<float> m(4 + i, 6 + i);
      for (auto& v : m) v = u(rng);
      list.push_back({m, static_cast<double>(u(rng))});
    }
    ev.instances.push_back(list);
    if (k == 1) {
      ev.dense.emplace_back(std::nullopt);
    } else {
      Plane<float> d(h, w);
      for (auto& v : d) v = 0.5f * u(rng);
      ev.dense.emplace_back(d);
    }
  }
  const RetentionConfig cfg{0.5, 3};
  const auto stack = build_score_stack(ev, h, w, cfg);
  ASSERT_EQ(stack.prompt_count(), k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    // Independent retention: sort a copy by confidence, keep the top 3 >= 0.5.
    auto list = ev.instances[k];
    std::vector<InstanceRecord> kept;
    for (auto& inst : list) {
      if (inst.confidence >= 0.5) kept.push_back(inst);
    }
    std::stable_sort(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.confidence > b.confidence; });
    if (kept.size() > 3) kept.resize(3);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double best = 0.0;
        for (auto& inst : kept) best = std::max(best, inst.confidence * bilinear_at(inst.mask, h, w, y, x));
        if (ev.dense[k]) best = std::max(best, double((*ev.dense[k])(y, x)));
        EXPECT_NEAR(stack[k](y, x), best, 1e-12);
      }
    }
  }
}

TEST(ScoreStack, SinglePromptEqualsConceptScore) {
  DateEvidence ev;
  ev.instances.push_back({instance(0.8, Plane<float>(2, 2, 0.5f))});
  const auto stack = build_score_stack(ev, 4, 4, {});
  EXPECT_EQ(stack[0], build_concept_score(filter_instances(ev.instances[0], {}), std::nullopt, 4, 4));
}

TEST(ScoreStack, AllZeroInputs) {
  DateEvidence ev;
  ev.instances.resize(3);
  ev.dense.assign(3, Plane<float>(4, 4, 0.0f));
  const auto stack = build_score_stack(ev, 8, 8, {});
  for (const auto& m : stack.maps()) {
    for (double v : m) EXPECT_EQ(v, 0.0);
  }
}

TEST(ScoreProperties, RangeMonotonicityAndDenseDominance) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<InstanceRecord> list;
    for (int i = 0; i < 4; ++i) {
      Plane<float> m(3, 3);
      for (auto& v : m) v = u(rng);
      list.push_back({m, static_cast<double>(u(rng))});
    }
    Plane<float> dense(9, 9);
    for (auto& v : dense) v = u(rng);
    const auto base = build_concept_score(list, dense, 9, 9);
    for (double v : base) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    auto more = list;
    Plane<float> extra(3, 3);
    for (auto& v : extra) v = u(rng);
    more.push_back({extra, static_cast<double>(u(rng))});
    const auto grown = build_concept_score(more, dense, 9, 9);
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_GE(grown[i], base[i]);

    const auto full = build_concept_score(list, Plane<float>(9, 9, 1.0f), 9, 9);
    for (double v : full) EXPECT_EQ(v, 1.0);
  }
}

}  // namespace
}  // namespace coreg
