#pragma once

// Gated fusion of the semantic delta with the geometry gate, clipping, and
// superpixel-mean pooling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

struct FusionConfig {
  double additive_weight = 0.1;  // alpha
  double gate_strength = 0.7;    // beta
  double gate_exponent = 1.0;    // gamma

  void validate() const {
    if (!(additive_weight >= 0.0)) throw Error(Errc::InvalidConfig, "additive_weight must be >= 0");
    if (!(gate_strength >= 0.0 && gate_strength <= 1.0)) throw Error(Errc::InvalidConfig, "gate_strength must lie in [0,1]");
    if (!(gate_exponent >= 0.0)) throw Error(Errc::InvalidConfig, "gate_exponent must be >= 0");
  }
};

inline double fuse_value(double delta, double gate, const FusionConfig& cfg) {
  const double g = std::pow(gate, cfg.gate_exponent);
  return delta * ((1.0 - cfg.gate_strength) + cfg.gate_strength * g) + cfg.additive_weight * g;
}

/// S = delta * ((1 - beta) + beta * G^gamma) + alpha * G^gamma. May exceed 1.
inline ScoreMap fuse(const ScoreMap& delta, const ScoreMap& gate, const FusionConfig& cfg) {
  require_same_shape(delta, gate, "fuse");
  ScoreMap out(delta.height(), delta.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fuse_value(delta[i], gate[i], cfg);
  return out;
}

inline ScoreMap clip_unit(ScoreMap score) {
  for (auto& v : score) v = std::clamp(v, 0.0, 1.0);
  return score;
}

inline RgbImage average_image(const RgbImage& a, const RgbImage& b) {
  require_same_shape(a, b, "average_image");
  RgbImage out(a.height(), a.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int c = 0; c < 3; ++c) out[i][c] = 0.5f * (a[i][c] + b[i][c]);
  }
  return out;
}

/// Number of distinct labels assuming labels are contiguous from 0.
inline std::size_t region_count(const LabelMap& labels) {
  std::int32_t hi = -1;
  for (auto l : labels) hi = std::max(hi, l);
  return static_cast<std::size_t>(hi + 1);
}

/// Replace every pixel by the mean of its region. Regions that are already
/// constant keep their value bit-for-bit, so pooling is exactly idempotent.
inline ScoreMap regional_pool(const ScoreMap& score, const LabelMap& labels) {
  require_same_shape(score, labels, "regional_pool");
  const std::size_t n = region_count(labels);
  std::vector<double> sum(n, 0.0), lo(n, std::numeric_limits<double>::infinity()),
      hi(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> count(n, 0);
  for (std::size_t i = 0; i < score.size(); ++i) {
    const auto l = labels[i];
    if (l < 0) throw Error(Errc::Internal, "negative superpixel label");
    sum[l] += score[i];
    lo[l] = std::min(lo[l], score[i]);
    hi[l] = std::max(hi[l], score[i]);
    ++count[l];
  }
  std::vector<double> mean(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (count[r] == 0) continue;
    mean[r] = lo[r] == hi[r] ? lo[r] : std::clamp(sum[r] / static_cast<double>(count[r]), lo[r], hi[r]);
  }
  ScoreMap out(score.height(), score.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean[labels[i]];
  return out;
}

}  // namespace coreg
