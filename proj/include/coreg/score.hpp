#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

/// One prompt-conditioned instance: a soft mask at the model's native
/// resolution and its detection confidence.
struct InstanceRecord {
  Plane<float> mask;
  double confidence = 0.0;
};

struct RetentionConfig {
  double confidence_threshold = 0.5;
  std::size_t top_r = 30;

  void validate() const {
    if (top_r < 1) throw Error(Errc::InvalidConfig, "top_r must be at least 1");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw Error(Errc::InvalidConfig, "confidence_threshold must lie in [0,1]");
    }
  }
};

/// Keep instances with confidence >= threshold, highest confidence first,
/// at most top_r of them. Equal confidences keep their input order.
inline std::vector<InstanceRecord> filter_instances(const std::vector<InstanceRecord>& instances,
                                                    const RetentionConfig& cfg) {
  std::vector<InstanceRecord> kept;
  kept.reserve(instances.size());
  for (const auto& inst : instances) {
    if (inst.confidence >= cfg.confidence_threshold) kept.push_back(inst);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const InstanceRecord& a, const InstanceRecord& b) { return a.confidence > b.confidence; });
  if (kept.size() > cfg.top_r) kept.resize(cfg.top_r);
  return kept;
}

namespace detail {

struct ResampleTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

// Half-pixel-centre mapping: src = (dst + 0.5) * (n_src / n_dst) - 0.5,
// clamped to the valid source range.
inline std::vector<ResampleTap> resample_taps(std::size_t n_src, std::size_t n_dst) {
  std::vector<ResampleTap> taps(n_dst);
  const double scale = static_cast<double>(n_src) / static_cast<double>(n_dst);
  const double max_coord = static_cast<double>(n_src - 1);
  for (std::size_t d = 0; d < n_dst; ++d) {
    const double s = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(s));
    taps[d] = {lo, std::min(lo + 1, n_src - 1), s - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

/// Bilinear resampling of a 2-D grid to height x width.
template <typename T>
ScoreMap upsample_bilinear(const Plane<T>& grid, std::size_t height, std::size_t width) {
  if (grid.height() == 0 || grid.width() == 0 || height == 0 || width == 0) {
    throw Error(Errc::ZeroDimension, "bilinear resampling needs non-empty source and target");
  }
  const auto ys = detail::resample_taps(grid.height(), height);
  const auto xs = detail::resample_taps(grid.width(), width);
  ScoreMap out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const auto& ty = ys[y];
    for (std::size_t x = 0; x < width; ++x) {
      const auto& tx = xs[x];
      const double top = static_cast<double>(grid(ty.lo, tx.lo)) * (1.0 - tx.frac) +
                         static_cast<double>(grid(ty.lo, tx.hi)) * tx.frac;
      const double bottom = static_cast<double>(grid(ty.hi, tx.lo)) * (1.0 - tx.frac) +
                            static_cast<double>(grid(ty.hi, tx.hi)) * tx.frac;
      out(y, x) = top * (1.0 - ty.frac) + bottom * ty.frac;
    }
  }
  return out;
}

/// Resample only when the grid is not already at the target size.
template <typename T>
ScoreMap to_pixel_grid(const Plane<T>& grid, std::size_t height, std::size_t width) {
  if (grid.height() == height && grid.width() == width) return plane_cast<double>(grid);
  return upsample_bilinear(grid, height, width);
}

/// Per-pixel concept confidence:
///   S(x) = max( max_i conf_i * mask_i(x), dense(x) )
/// with the instance maximum taken as 0 when no instance is retained and an
/// absent dense branch treated as all-zero.
inline ScoreMap build_concept_score(const std::vector<InstanceRecord>& retained,
                                    const std::optional<Plane<float>>& dense_branch, std::size_t height,
                                    std::size_t width) {
  ScoreMap score(height, width, 0.0);
  for (const auto& inst : retained) {
    const ScoreMap mask = to_pixel_grid(inst.mask, height, width);
    for (std::size_t i = 0; i < score.size(); ++i) score[i] = std::max(score[i], inst.confidence * mask[i]);
  }
  if (dense_branch) {
    const ScoreMap dense = to_pixel_grid(*dense_branch, height, width);
    for (std::size_t i = 0; i < score.size(); ++i) score[i] = std::max(score[i], dense[i]);
  }
  return score;
}

/// Scores for every vocabulary prompt at one date, indexed like the vocabulary.
class ScoreStack {
 public:
  ScoreStack() = default;
  explicit ScoreStack(std::vector<ScoreMap> maps) : maps_(std::move(maps)) {
    if (maps_.empty()) throw Error(Errc::InvalidConfig, "score stack needs at least one prompt");
    for (const auto& m : maps_) require_same_shape(m, maps_.front(), "score stack");
  }

  std::size_t prompt_count() const noexcept { return maps_.size(); }
  std::size_t height() const noexcept { return maps_.empty() ? 0 : maps_.front().height(); }
  std::size_t width() const noexcept { return maps_.empty() ? 0 : maps_.front().width(); }
  const ScoreMap& operator[](std::size_t k) const { return maps_[k]; }
  const std::vector<ScoreMap>& maps() const noexcept { return maps_; }

 private:
  std::vector<ScoreMap> maps_;
};

/// Raw per-prompt inputs for one acquisition date.
struct DateEvidence {
  std::vector<std::vector<InstanceRecord>> instances;    // one list per prompt
  std::vector<std::optional<Plane<float>>> dense;        // one entry per prompt, or empty
};

inline ScoreStack build_score_stack(const DateEvidence& evidence, std::size_t height, std::size_t width,
                                    const RetentionConfig& cfg) {
  const std::size_t k_count = evidence.instances.size();
  if (!evidence.dense.empty() && evidence.dense.size() != k_count) {
    throw Error(Errc::ShapeMismatch, "dense branch count does not match prompt count");
  }
  std::vector<ScoreMap> maps;
  maps.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto retained = filter_instances(evidence.instances[k], cfg);
    const std::optional<Plane<float>> none;
    maps.push_back(build_concept_score(retained, evidence.dense.empty() ? none : evidence.dense[k], height, width));
  }
  return ScoreStack(std::move(maps));
}

}  // namespace coreg
