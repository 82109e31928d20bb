#pragma once

// Changed-class metrics under the per-class OR rule, dataset aggregation and
// the latency harness.

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

/// Positive iff the pixel changed and the class is present at either date.
template <typename L>
BinaryMask derive_class_gt(const Plane<L>& sem_a, const Plane<L>& sem_b, const BinaryMask& change_gt, L class_id) {
  require_same_shape(sem_a, sem_b, "derive_class_gt");
  require_same_shape(sem_a, change_gt, "derive_class_gt");
  BinaryMask gt(change_gt.height(), change_gt.width());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = change_gt[i] != 0 && (sem_a[i] == class_id || sem_b[i] == class_id) ? 1 : 0;
  }
  return gt;
}

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// Percentages in [0, 100]; any 0/0 ratio is reported as 0.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  double f1 = 0.0;
};

inline Metrics metrics(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double p = ratio(tp, tp + fp);
  const double r = ratio(tp, tp + fn);
  return {100.0 * p, 100.0 * r, 100.0 * ratio(tp, tp + fp + fn), 100.0 * ratio(2.0 * p * r, p + r)};
}

enum class Aggregation {
  Micro,  // sum counts over pairs, then compute metrics once per class
  Macro,  // average per-pair metrics within a class
};

struct ClassReport {
  std::string name;
  ConfusionCounts counts;
  Metrics metrics;
  std::size_t pairs = 0;
};

struct TimingStats {
  std::size_t measured = 0;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
  double io_mean_seconds = 0.0;
  double pairs_per_minute = 0.0;
  long peak_rss_bytes = 0;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  Metrics class_average;
  std::size_t pair_count = 0;
  Aggregation aggregation = Aggregation::Micro;
  TimingStats timing;
};

/// Unweighted mean of per-class metrics.
inline Metrics class_average(const std::vector<Metrics>& per_class) {
  Metrics avg;
  if (per_class.empty()) return avg;
  for (const auto& m : per_class) {
    avg.precision += m.precision;
    avg.recall += m.recall;
    avg.iou += m.iou;
    avg.f1 += m.f1;
  }
  const double n = static_cast<double>(per_class.size());
  return {avg.precision / n, avg.recall / n, avg.iou / n, avg.f1 / n};
}

/// Fold per-pair counts into a dataset report. The input maps a class name to
/// the counts of every pair evaluated for it; the result does not depend on
/// pair order under micro aggregation.
inline EvalReport aggregate(const std::map<std::string, std::vector<ConfusionCounts>>& per_class_pairs,
                            Aggregation mode = Aggregation::Micro) {
  EvalReport report;
  report.aggregation = mode;
  std::vector<Metrics> per_class;
  for (const auto& [name, pairs] : per_class_pairs) {
    if (pairs.empty()) continue;
    ClassReport cr;
    cr.name = name;
    cr.pairs = pairs.size();
    for (const auto& c : pairs) cr.counts += c;
    if (mode == Aggregation::Micro) {
      cr.metrics = metrics(cr.counts);
    } else {
      std::vector<Metrics> each;
      each.reserve(pairs.size());
      for (const auto& c : pairs) each.push_back(metrics(c));
      cr.metrics = class_average(each);
    }
    report.pair_count = std::max(report.pair_count, pairs.size());
    per_class.push_back(cr.metrics);
    report.classes.push_back(std::move(cr));
  }
  if (report.classes.empty()) throw Error(Errc::EmptyDataset, "no evaluated pairs");
  report.class_average = class_average(per_class);
  return report;
}

inline double throughput_per_minute(double mean_latency_seconds) {
  return mean_latency_seconds > 0.0 ? 60.0 / mean_latency_seconds : 0.0;
}

/// Peak resident set size of this process, or 0 where unavailable.
inline long peak_rss_bytes() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return usage.ru_maxrss * 1024L;  // kilobytes on Linux
}

/// Summarise latencies; the first `warmup` samples are dropped.
inline TimingStats summarize_latencies(std::vector<double> seconds, std::size_t warmup = 1,
                                       std::vector<double> io_seconds = {}) {
  TimingStats t;
  const std::size_t skip = std::min(warmup, seconds.size());
  seconds.erase(seconds.begin(), seconds.begin() + static_cast<std::ptrdiff_t>(skip));
  if (io_seconds.size() >= skip) io_seconds.erase(io_seconds.begin(), io_seconds.begin() + static_cast<std::ptrdiff_t>(skip));
  t.measured = seconds.size();
  if (seconds.empty()) return t;
  t.mean_seconds = std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size());
  std::sort(seconds.begin(), seconds.end());
  const std::size_t mid = seconds.size() / 2;
  t.median_seconds = seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
  t.min_seconds = seconds.front();
  t.max_seconds = seconds.back();
  if (!io_seconds.empty()) {
    t.io_mean_seconds = std::accumulate(io_seconds.begin(), io_seconds.end(), 0.0) / static_cast<double>(io_seconds.size());
  }
  t.pairs_per_minute = throughput_per_minute(t.mean_seconds);
  t.peak_rss_bytes = peak_rss_bytes();
  return t;
}

/// Wall-clock seconds taken by fn().
template <typename Fn>
double time_pair(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace coreg
