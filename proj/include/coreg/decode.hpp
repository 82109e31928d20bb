#pragma once

// Final mask decoding: 8-bit quantised threshold, then opening, closing and
// removal of small 8-connected components.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

inline constexpr std::size_t kReferenceArea = 512 * 512;

struct DecodeConfig {
  int tau_u8 = 127;
  std::size_t opening_radius = 1;
  std::size_t closing_radius = 1;
  /// Components with fewer pixels are removed. Unset selects 32 pixels at
  /// 512x512, scaled by image area (minimum 1).
  std::optional<std::size_t> min_component_area;

  void validate() const {
    if (tau_u8 < 0 || tau_u8 > 255) throw Error(Errc::InvalidConfig, "tau_u8 must lie in [0,255]");
  }

  std::size_t resolved_min_area(std::size_t height, std::size_t width) const {
    if (min_component_area) return *min_component_area;
    const auto scaled = static_cast<std::size_t>(std::floor(32.0 * static_cast<double>(height * width) / kReferenceArea));
    return std::max<std::size_t>(scaled, 1);
  }
};

inline int quantize_u8(double v) {
  return std::clamp(static_cast<int>(std::floor(255.0 * v)), 0, 255);
}

/// Y0(x) = [ floor(255 * S(x)) > tau ].
inline BinaryMask quantize_and_threshold(const ScoreMap& pooled, int tau_u8) {
  BinaryMask out(pooled.height(), pooled.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize_u8(pooled[i]) > tau_u8 ? 1 : 0;
  return out;
}

namespace detail {

// Square structuring element of side 2r+1, applied separably. Pixels outside
// the image are ignored, so borders neither erode nor grow objects.
inline BinaryMask morph(const BinaryMask& in, std::size_t r, bool dilate) {
  if (r == 0) return in;
  const std::size_t h = in.height(), w = in.width();
  const std::uint8_t identity = dilate ? 0 : 1;
  auto pick = [dilate](std::uint8_t a, std::uint8_t b) { return dilate ? std::max(a, b) : std::min(a, b); };
  BinaryMask rows(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = identity;
      const std::size_t x0 = x >= r ? x - r : 0, x1 = std::min(x + r, w - 1);
      for (std::size_t xx = x0; xx <= x1; ++xx) v = pick(v, in(y, xx));
      rows(y, x) = v;
    }
  }
  BinaryMask out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y >= r ? y - r : 0, y1 = std::min(y + r, h - 1);
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = identity;
      for (std::size_t yy = y0; yy <= y1; ++yy) v = pick(v, rows(yy, x));
      out(y, x) = v;
    }
  }
  return out;
}

}  // namespace detail

inline BinaryMask erode(const BinaryMask& m, std::size_t r) { return detail::morph(m, r, false); }
inline BinaryMask dilate(const BinaryMask& m, std::size_t r) { return detail::morph(m, r, true); }
inline BinaryMask open(const BinaryMask& m, std::size_t r) { return dilate(erode(m, r), r); }
inline BinaryMask close(const BinaryMask& m, std::size_t r) { return erode(dilate(m, r), r); }

/// Clear 8-connected foreground components smaller than min_area pixels.
inline BinaryMask remove_small_components(const BinaryMask& in, std::size_t min_area) {
  if (min_area <= 1) return in;
  const std::size_t h = in.height(), w = in.width();
  BinaryMask out = in;
  std::vector<std::uint8_t> seen(in.size(), 0);
  std::vector<std::size_t> stack, members;
  for (std::size_t start = 0; start < in.size(); ++start) {
    if (!in[start] || seen[start]) continue;
    seen[start] = 1;
    stack.assign(1, start);
    members.clear();
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const std::size_t y = p / w, x = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dy == 0 && dx == 0) || (y == 0 && dy < 0) || (y + 1 == h && dy > 0) || (x == 0 && dx < 0) ||
              (x + 1 == w && dx > 0)) {
            continue;
          }
          const std::size_t q = (y + dy) * w + (x + dx);
          if (in[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    if (members.size() < min_area) {
      for (auto p : members) out[p] = 0;
    }
  }
  return out;
}

/// Opening, then closing, then small-component removal.
inline BinaryMask struct_filter(const BinaryMask& mask, const DecodeConfig& cfg) {
  const BinaryMask smoothed = close(open(mask, cfg.opening_radius), cfg.closing_radius);
  return remove_small_components(smoothed, cfg.resolved_min_area(mask.height(), mask.width()));
}

}  // namespace coreg
