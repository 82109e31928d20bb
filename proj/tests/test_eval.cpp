#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <thread>

#include "coreg/eval.hpp"
#include "test_support.hpp"

namespace coreg {
namespace {

TEST(ClassGroundTruth, OrRule) {
  const LabelMap a(1, 4, std::vector<std::int32_t>{1, 2, 1, 2});
  const LabelMap b(1, 4, std::vector<std::int32_t>{1, 1, 2, 2});
  const BinaryMask change(1, 4, std::vector<std::uint8_t>{1, 1, 1, 1});
  EXPECT_EQ(derive_class_gt(a, b, change, 1).data(), (std::vector<std::uint8_t>{1, 1, 1, 0}));
  const BinaryMask none(1, 4, 0);
  for (auto v : derive_class_gt(a, b, none, 1)) EXPECT_EQ(v, 0);
}

TEST(Confusion, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = testing::random_mask(rng, 17, 19), g = testing::random_mask(rng, 17, 19, 0.3);
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] && g[i];
      fp += p[i] && !g[i];
      fn += !p[i] && g[i];
      tn += !p[i] && !g[i];
    }
    const auto c = confusion(p, g);
    EXPECT_EQ(c, (ConfusionCounts{tp, fp, fn, tn}));
    EXPECT_EQ(c.total(), p.size());
  }
}

TEST(Metrics, ReferenceCounts) {
  const auto m = metrics({3, 1, 1, 0});
  EXPECT_NEAR(m.precision, 75.0, 1e-12);
  EXPECT_NEAR(m.recall, 75.0, 1e-12);
  EXPECT_NEAR(m.f1, 75.0, 1e-12);
  EXPECT_NEAR(m.iou, 60.0, 1e-12);
}

TEST(Metrics, DegenerateAndPerfect) {
  const auto empty = metrics({0, 0, 0, 100});
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.iou, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
  const auto perfect = metrics({10, 0, 0, 5});
  EXPECT_EQ(perfect.precision, 100.0);
  EXPECT_EQ(perfect.recall, 100.0);
  EXPECT_EQ(perfect.iou, 100.0);
  EXPECT_EQ(perfect.f1, 100.0);
}

TEST(Metrics, F1IouIdentityAndRanges) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::uint64_t> n(0, 50);
  for (int i = 0; i < 5000; ++i) {
    const ConfusionCounts c{n(rng), n(rng), n(rng), n(rng)};
    const auto m = metrics(c);
    for (double v : {m.precision, m.recall, m.iou, m.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    const double f = m.f1 / 100.0, j = m.iou / 100.0;
    EXPECT_NEAR(f, 2 * j / (1 + j), 1e-12);
    EXPECT_LE(m.iou, m.f1 + 1e-12);
  }
}

TEST(Aggregate, MicroSumsCounts) {
  // Pair 1 perfect on 10 pixels, pair 2 entirely missed on 10 pixels.
  const auto r = aggregate({{"building", {{10, 0, 0, 0}, {0, 0, 10, 0}}}});
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_NEAR(r.classes[0].metrics.iou, 50.0, 1e-12);
  EXPECT_NEAR(r.classes[0].metrics.f1, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.classes[0].metrics.precision, 100.0, 1e-12);
  EXPECT_NEAR(r.classes[0].metrics.recall, 50.0, 1e-12);
}

TEST(Aggregate, MacroAveragesPairs) {
  const auto r = aggregate({{"building", {{10, 0, 0, 0}, {0, 0, 10, 0}}}}, Aggregation::Macro);
  EXPECT_NEAR(r.classes[0].metrics.iou, 50.0, 1e-12);
  EXPECT_NEAR(r.classes[0].metrics.f1, 50.0, 1e-12);
}

TEST(Aggregate, ClassAverageOfPublishedRow) {
  // Per-class F1 of the full method over the six classes of the reported table.
  const std::vector<double> f1{65.69, 34.61, 46.01, 43.40, 48.79, 46.52};
  std::vector<Metrics> per_class;
  for (double v : f1) per_class.push_back({0, 0, 0, v});
  EXPECT_NEAR(class_average(per_class).f1, 47.50, 5e-3);
}

TEST(Aggregate, ClassAverageIsUnweighted) {
  const auto r = aggregate({{"a", {{1, 0, 0, 0}}}, {"b", {{0, 0, 1000, 0}, {0, 0, 1000, 0}}}});
  EXPECT_NEAR(r.class_average.iou, 50.0, 1e-12);
  EXPECT_EQ(r.pair_count, 2u);
}

TEST(Aggregate, OrderInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> n(0, 100);
  std::vector<ConfusionCounts> pairs(12);
  for (auto& c : pairs) c = {n(rng), n(rng), n(rng), n(rng)};
  const auto base = aggregate({{"x", pairs}});
  for (int t = 0; t < 10; ++t) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto r = aggregate({{"x", pairs}});
    EXPECT_EQ(r.classes[0].counts, base.classes[0].counts);
    EXPECT_EQ(r.classes[0].metrics.f1, base.classes[0].metrics.f1);
  }
}

TEST(Aggregate, EmptyDataset) {
  try {
    aggregate({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
}

TEST(Timing, ThroughputFromMeanLatency) {
  EXPECT_NEAR(throughput_per_minute(1.39), 43.17, 5e-3);
  EXPECT_EQ(throughput_per_minute(0.0), 0.0);
}

TEST(Timing, WarmupIsExcluded) {
  const auto t = summarize_latencies({10.0, 1.0, 2.0, 3.0}, 1, {5.0, 0.1, 0.2, 0.3});
  EXPECT_EQ(t.measured, 3u);
  EXPECT_NEAR(t.mean_seconds, 2.0, 1e-12);
  EXPECT_NEAR(t.median_seconds, 2.0, 1e-12);
  EXPECT_EQ(t.min_seconds, 1.0);
  EXPECT_EQ(t.max_seconds, 3.0);
  EXPECT_NEAR(t.io_mean_seconds, 0.2, 1e-12);
  EXPECT_NEAR(t.pairs_per_minute, 30.0, 1e-12);
  EXPECT_GT(t.peak_rss_bytes, 0);
}

TEST(Timing, TimePairMeasuresWallClock) {
  const double s = time_pair([] { std::this_thread::sleep_for(std::chrono::milliseconds(20)); });
  EXPECT_GE(s, 0.019);
  EXPECT_LT(s, 1.0);
}

}  // namespace
}  // namespace coreg
