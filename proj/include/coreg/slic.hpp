#pragma once

// SLIC superpixels (Achanta et al.): k-means in (L, a, b, x, y) restricted to
// a local window around each centre, followed by connectivity enforcement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

struct SlicConfig {
  std::size_t n_segments = 256;
  double compactness = 10.0;
  std::size_t iterations = 10;
  double min_region_fraction = 0.25;

  void validate() const {
    if (n_segments < 1) throw Error(Errc::InvalidConfig, "n_segments must be at least 1");
    if (iterations < 1) throw Error(Errc::InvalidConfig, "iterations must be at least 1");
    if (!(compactness >= 0.0)) throw Error(Errc::InvalidConfig, "compactness must be >= 0");
    if (!(min_region_fraction >= 0.0)) throw Error(Errc::InvalidConfig, "min_region_fraction must be >= 0");
  }
};

using Lab = std::array<double, 3>;

/// sRGB (0..255, D65) to CIELAB.
inline Lab rgb_to_lab(const Rgb& rgb) {
  auto linear = [](double v) {
    v /= 255.0;
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
  };
  const double r = linear(rgb[0]), g = linear(rgb[1]), b = linear(rgb[2]);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  constexpr double eps = 216.0 / 24389.0;
  constexpr double kappa = 24389.0 / 27.0;
  auto f = [](double t) { return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0; };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace detail {

struct SlicCenter {
  Lab lab;
  double y = 0.0;
  double x = 0.0;
};

inline double lab_dist2(const Lab& a, const Lab& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

// Grid of ny x nx seeds whose product is close to the request and whose
// aspect follows the image.
inline std::pair<std::size_t, std::size_t> seed_grid(std::size_t h, std::size_t w, std::size_t n) {
  const auto ny = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n) * h / static_cast<double>(w)))), 1, h);
  const auto nx = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(static_cast<double>(n) / static_cast<double>(ny))), 1, w);
  return {ny, nx};
}

inline std::vector<SlicCenter> seed_centers(const Plane<Lab>& lab, std::size_t n) {
  const std::size_t h = lab.height(), w = lab.width();
  const auto [ny, nx] = seed_grid(h, w, n);
  const double step_y = static_cast<double>(h) / static_cast<double>(ny);
  const double step_x = static_cast<double>(w) / static_cast<double>(nx);

  auto gradient = [&](std::size_t y, std::size_t x) {
    const std::size_t x0 = x > 0 ? x - 1 : x, x1 = std::min(x + 1, w - 1);
    const std::size_t y0 = y > 0 ? y - 1 : y, y1 = std::min(y + 1, h - 1);
    return lab_dist2(lab(y, x1), lab(y, x0)) + lab_dist2(lab(y1, x), lab(y0, x));
  };

  std::vector<SlicCenter> centers;
  centers.reserve(ny * nx);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const auto cy = std::min(static_cast<std::size_t>((static_cast<double>(iy) + 0.5) * step_y), h - 1);
      const auto cx = std::min(static_cast<std::size_t>((static_cast<double>(ix) + 0.5) * step_x), w - 1);
      // Move the seed to the lowest-gradient pixel of its 3x3 neighbourhood.
      std::size_t by = cy, bx = cx;
      double best = gradient(cy, cx);
      for (std::size_t yy = cy > 0 ? cy - 1 : cy; yy <= std::min(cy + 1, h - 1); ++yy) {
        for (std::size_t xx = cx > 0 ? cx - 1 : cx; xx <= std::min(cx + 1, w - 1); ++xx) {
          const double g = gradient(yy, xx);
          if (g < best) {
            best = g;
            by = yy;
            bx = xx;
          }
        }
      }
      centers.push_back({lab(by, bx), static_cast<double>(by), static_cast<double>(bx)});
    }
  }
  return centers;
}

// Split labels into 4-connected components, fold components smaller than
// min_size into their largest neighbour, and relabel 0..n-1 in raster order.
inline LabelMap enforce_connectivity(const LabelMap& labels, double min_size) {
  const std::size_t h = labels.height(), w = labels.width();
  LabelMap comp(h, w, -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (comp[start] >= 0) continue;
    const auto label = labels[start];
    comp[start] = next;
    std::size_t size = 0;
    stack.assign(1, start);
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      ++size;
      const std::size_t y = p / w, x = p % w;
      auto visit = [&](std::size_t q) {
        if (comp[q] < 0 && labels[q] == label) {
          comp[q] = next;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
    }
    sizes.push_back(size);
    ++next;
  }

  const std::size_t n = sizes.size();
  std::vector<std::set<std::int32_t>> adjacent(n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto a = comp(y, x);
      if (x + 1 < w && comp(y, x + 1) != a) {
        adjacent[a].insert(comp(y, x + 1));
        adjacent[comp(y, x + 1)].insert(a);
      }
      if (y + 1 < h && comp(y + 1, x) != a) {
        adjacent[a].insert(comp(y + 1, x));
        adjacent[comp(y + 1, x)].insert(a);
      }
    }
  }

  std::vector<std::int32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::int32_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };

  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sizes[a] < sizes[b]; });
  for (auto c : order) {
    auto root = find(c);
    while (static_cast<double>(sizes[root]) < min_size) {
      std::int32_t target = -1;
      for (auto nb : adjacent[root]) {
        const auto r = find(nb);
        if (r == root) continue;
        if (target < 0 || sizes[r] > sizes[target] || (sizes[r] == sizes[target] && r < target)) target = r;
      }
      if (target < 0) break;  // the only region in the image
      parent[root] = target;
      sizes[target] += sizes[root];
      for (auto nb : adjacent[root]) adjacent[target].insert(find(nb));
      adjacent[root].clear();
      root = target;
    }
  }

  LabelMap out(h, w);
  std::vector<std::int32_t> remap(n, -1);
  std::int32_t count = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = find(comp[i]);
    if (remap[r] < 0) remap[r] = count++;
    out[i] = remap[r];
  }
  return out;
}

}  // namespace detail

/// Superpixel labels for an RGB image; labels are contiguous from 0 and every
/// region is 4-connected.
inline LabelMap slic_segment(const RgbImage& image, const SlicConfig& cfg) {
  cfg.validate();
  const std::size_t h = image.height(), w = image.width();
  if (h == 0 || w == 0) throw Error(Errc::ZeroDimension, "empty image");
  if (cfg.n_segments > h * w) {
    throw Error(Errc::TooManySegments, std::to_string(cfg.n_segments) + " segments requested for " +
                                           std::to_string(h * w) + " pixels");
  }

  Plane<Lab> lab(h, w);
  for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = rgb_to_lab(image[i]);

  auto centers = detail::seed_centers(lab, cfg.n_segments);
  const double s = std::sqrt(static_cast<double>(h * w) / static_cast<double>(cfg.n_segments));
  const double spatial_weight = (cfg.compactness / s) * (cfg.compactness / s);
  const auto [ny, nx] = detail::seed_grid(h, w, cfg.n_segments);
  const auto radius = static_cast<long>(std::ceil(std::max({s, static_cast<double>(h) / ny, static_cast<double>(w) / nx})));

  LabelMap labels(h, w, -1);
  std::vector<double> dist(h * w);
  auto distance = [&](const detail::SlicCenter& c, std::size_t y, std::size_t x) {
    const double dy = static_cast<double>(y) - c.y, dx = static_cast<double>(x) - c.x;
    return detail::lab_dist2(lab(y, x), c.lab) + spatial_weight * (dy * dy + dx * dx);
  };

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const long cy = std::lround(c.y), cx = std::lround(c.x);
      const auto y0 = static_cast<std::size_t>(std::max(0L, cy - radius));
      const auto y1 = static_cast<std::size_t>(std::min(static_cast<long>(h) - 1, cy + radius));
      const auto x0 = static_cast<std::size_t>(std::max(0L, cx - radius));
      const auto x1 = static_cast<std::size_t>(std::min(static_cast<long>(w) - 1, cx + radius));
      for (std::size_t y = y0; y <= y1; ++y) {
        for (std::size_t x = x0; x <= x1; ++x) {
          const double d = distance(c, y, x);
          const std::size_t p = y * w + x;
          if (d < dist[p]) {  // strict: lower centre index wins ties
            dist[p] = d;
            labels[p] = static_cast<std::int32_t>(k);
          }
        }
      }
    }
    // Pixels outside every window (centres drifted apart) take the globally
    // nearest centre.
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (labels[p] >= 0) continue;
      const std::size_t y = p / w, x = p % w;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const double d = distance(centers[k], y, x);
        if (d < best) {
          best = d;
          labels[p] = static_cast<std::int32_t>(k);
        }
      }
    }

    std::vector<std::array<double, 5>> acc(centers.size(), {0, 0, 0, 0, 0});
    std::vector<std::size_t> count(centers.size(), 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      auto& a = acc[labels[p]];
      const auto& v = lab[p];
      a[0] += v[0];
      a[1] += v[1];
      a[2] += v[2];
      a[3] += static_cast<double>(p / w);
      a[4] += static_cast<double>(p % w);
      ++count[labels[p]];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (count[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[k]);
      centers[k] = {{acc[k][0] * inv, acc[k][1] * inv, acc[k][2] * inv}, acc[k][3] * inv, acc[k][4] * inv};
    }
  }

  const double min_size = cfg.min_region_fraction * static_cast<double>(h * w) / static_cast<double>(cfg.n_segments);
  return detail::enforce_connectivity(labels, min_size);
}

}  // namespace coreg
