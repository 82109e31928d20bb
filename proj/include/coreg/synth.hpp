#pragma once

// Deterministic synthetic pairs with a planted concept change.
//
// Date b gains one instance of the queried concept inside the planted
// rectangle. A static instance of the concept sits elsewhere at both dates.
// Competitor prompts carry a smooth activation field shared by both dates,
// and the first competitor also occupies the planted rectangle at date a.
// Appearance pseudo-change adds blobs of queried-concept score and brightness
// at date b away from the planted rectangle; geometry tokens change only
// inside it (rotated by a fixed angle) plus optional token noise elsewhere.
//
// Random numbers come from std::mt19937_64 seeded with SceneSpec::seed; the
// engine's output sequence is fixed by the C++ standard, and uniform/normal
// variates are derived from raw draws here, so fixtures are bit-identical
// across platforms and standard libraries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"
#include "coreg/manifest.hpp"
#include "coreg/png_io.hpp"
#include "coreg/tensorio.hpp"

namespace coreg {

struct Rect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool contains(std::size_t y, std::size_t x) const noexcept {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
  bool overlaps(const Rect& o) const noexcept {
    return top < o.top + o.height && o.top < top + height && left < o.left + o.width && o.left < left + width;
  }
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t vocabulary_size = 4;
  std::size_t token_depth = 8;
  std::size_t token_rows = 8;
  std::size_t token_cols = 8;
  Rect planted{20, 20, 24, 24};
  std::size_t queried = 0;
  double competitor_strength = 0.3;
  double pseudo_change_noise = 0.0;
  double token_change_magnitude = std::numbers::pi;  // radians
  double token_noise = 0.0;                          // std-dev outside the planted region
  std::size_t mask_downsample = 2;                   // native instance-mask resolution factor

  void validate() const {
    if (height == 0 || width == 0) throw Error(Errc::SpecInvalid, "image size must be positive");
    if (vocabulary_size == 0) throw Error(Errc::SpecInvalid, "vocabulary must be non-empty");
    if (queried >= vocabulary_size) throw Error(Errc::SpecInvalid, "queried prompt outside vocabulary");
    if (token_depth < 2 || token_rows == 0 || token_cols == 0) throw Error(Errc::SpecInvalid, "token grid too small");
    if (planted.height == 0 || planted.width == 0 || planted.top + planted.height > height ||
        planted.left + planted.width > width) {
      throw Error(Errc::SpecInvalid, "planted region outside image bounds");
    }
    if (!(competitor_strength >= 0.0 && competitor_strength <= 1.0)) {
      throw Error(Errc::SpecInvalid, "competitor_strength must lie in [0,1]");
    }
    if (!(pseudo_change_noise >= 0.0) || !(token_noise >= 0.0)) throw Error(Errc::SpecInvalid, "noise must be >= 0");
    if (mask_downsample == 0) throw Error(Errc::SpecInvalid, "mask_downsample must be positive");
  }
};

/// A spec with a seed-dependent planted rectangle covering about a ninth of
/// the image.
inline SceneSpec default_scene(std::uint64_t seed, std::size_t height = 64, std::size_t width = 64,
                               std::size_t vocabulary_size = 4) {
  SceneSpec s;
  s.seed = seed;
  s.height = height;
  s.width = width;
  s.vocabulary_size = vocabulary_size;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  s.planted.height = std::max<std::size_t>(4, height / 3);
  s.planted.width = std::max<std::size_t>(4, width / 3);
  s.planted.top = static_cast<std::size_t>(rng() % (height - s.planted.height + 1));
  s.planted.left = static_cast<std::size_t>(rng() % (width - s.planted.width + 1));
  return s;
}

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

struct SceneResult {
  std::filesystem::path manifest_path;
  std::string class_name;
  BinaryMask planted;
};

namespace detail {

inline std::vector<std::string> scene_vocabulary(std::size_t k) {
  static const char* names[] = {"building", "tree", "water", "low vegetation", "surface", "playground", "road", "bare land"};
  std::vector<std::string> v;
  for (std::size_t i = 0; i < k; ++i) {
    std::string n = names[i % 8];
    if (i >= 8) n += " " + std::to_string(i / 8);
    v.push_back(n);
  }
  return v;
}

// Fraction of each native-resolution cell covered by the rectangle.
inline Plane<float> coverage_mask(const Rect& r, std::size_t h, std::size_t w, std::size_t factor) {
  const std::size_t mh = (h + factor - 1) / factor, mw = (w + factor - 1) / factor;
  Plane<float> m(mh, mw, 0.0f);
  for (std::size_t y = 0; y < mh; ++y) {
    for (std::size_t x = 0; x < mw; ++x) {
      std::size_t in = 0, total = 0;
      for (std::size_t yy = y * factor; yy < std::min(h, (y + 1) * factor); ++yy) {
        for (std::size_t xx = x * factor; xx < std::min(w, (x + 1) * factor); ++xx) {
          ++total;
          in += r.contains(yy, xx) ? 1 : 0;
        }
      }
      m(y, x) = static_cast<float>(in) / static_cast<float>(total);
    }
  }
  return m;
}

struct Blob {
  double cy, cx, radius, amplitude;
};

inline double blob_field(const std::vector<Blob>& blobs, std::size_t y, std::size_t x) {
  double v = 0.0;
  for (const auto& b : blobs) {
    const double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
    v = std::max(v, b.amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * b.radius * b.radius)));
  }
  return v;
}

inline void write_instances(const std::filesystem::path& path, const std::vector<Plane<float>>& masks) {
  std::vector<float> data;
  for (const auto& m : masks) data.insert(data.end(), m.begin(), m.end());
  write_dense_array(path, DenseArray({masks.size(), masks.front().height(), masks.front().width()}, std::move(data)));
}

}  // namespace detail

/// Write a pair manifest and its tensor files under out_dir and return the
/// planted ground truth. Same spec, same bytes.
inline SceneResult gen_scene(const SceneSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  const std::size_t h = spec.height, w = spec.width, k_count = spec.vocabulary_size, q = spec.queried;
  SceneRng rng(spec.seed);

  std::error_code ec;
  for (const char* sub : {"a", "b", "gt"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  // Static instance of the queried concept, placed away from the planted one.
  Rect fixed{0, 0, std::max<std::size_t>(2, h / 5), std::max<std::size_t>(2, w / 5)};
  fixed.top = spec.planted.top + spec.planted.height / 2 < h / 2 ? h - fixed.height - h / 10 : h / 10;
  fixed.left = spec.planted.left + spec.planted.width / 2 < w / 2 ? w - fixed.width - w / 10 : w / 10;
  const bool has_fixed = !fixed.overlaps(spec.planted) && fixed.top + fixed.height <= h && fixed.left + fixed.width <= w;

  // Competitor activation field shared by both dates.
  std::vector<detail::Blob> competitor_blobs;
  for (int i = 0; i < 4; ++i) {
    competitor_blobs.push_back({rng.uniform(0, static_cast<double>(h)), rng.uniform(0, static_cast<double>(w)),
                                rng.uniform(0.1, 0.25) * static_cast<double>(std::min(h, w)),
                                spec.competitor_strength * rng.uniform(0.6, 1.0)});
  }

  // Pseudo-change blobs, centred outside the planted rectangle.
  std::vector<detail::Blob> pseudo_blobs;
  if (spec.pseudo_change_noise > 0.0) {
    for (int i = 0; i < 3; ++i) {
      double cy = 0, cx = 0;
      for (int attempt = 0; attempt < 32; ++attempt) {
        cy = rng.uniform(0, static_cast<double>(h));
        cx = rng.uniform(0, static_cast<double>(w));
        if (!spec.planted.contains(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx))) break;
      }
      pseudo_blobs.push_back({cy, cx, rng.uniform(0.06, 0.12) * static_cast<double>(std::min(h, w)),
                              spec.pseudo_change_noise * rng.uniform(0.8, 1.0)});
    }
  }

  const auto vocabulary = detail::scene_vocabulary(k_count);
  PairManifest m;
  m.base_dir = out_dir;
  m.pair_id = "scene_" + std::to_string(spec.seed);
  m.height = h;
  m.width = w;
  m.vocabulary = vocabulary;
  m.prompt_sets[vocabulary[q]] = {q};

  const Plane<float> planted_mask = detail::coverage_mask(spec.planted, h, w, spec.mask_downsample);
  const Plane<float> fixed_mask = detail::coverage_mask(fixed, h, w, spec.mask_downsample);
  Rect distractor{h / 2, 0, std::max<std::size_t>(1, h / 8), std::max<std::size_t>(1, w / 8)};
  const Plane<float> distractor_mask = detail::coverage_mask(distractor, h, w, spec.mask_downsample);

  // Background colour field with mild texture, shared by both dates.
  RgbImage base(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double t = 6.0 * rng.normal();
      base(y, x) = {static_cast<float>(90 + t), static_cast<float>(120 + t), static_cast<float>(70 + t)};
      if (has_fixed && fixed.contains(y, x)) base(y, x) = {150.f, 150.f, 155.f};
    }
  }

  for (const char* tag : {"a", "b"}) {
    const bool late = tag[0] == 'b';
    DateFiles files;
    for (std::size_t k = 0; k < k_count; ++k) {
      PromptFiles pf;
      Plane<float> dense(h, w);
      std::vector<Plane<float>> masks;
      if (k == q) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double v = 0.05;
            if (late && !pseudo_blobs.empty()) {
              v += detail::blob_field(pseudo_blobs, y, x) + 0.05 * spec.pseudo_change_noise * rng.normal();
            }
            dense(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
        if (has_fixed) {
          masks.push_back(fixed_mask);
          pf.confidences.push_back(0.9);
        }
        if (late) {
          masks.push_back(planted_mask);
          pf.confidences.push_back(0.95);
          masks.push_back(distractor_mask);  // dropped by the confidence filter
          pf.confidences.push_back(0.3);
        }
      } else {
        const bool displaced = !late && k == (q + 1) % k_count;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double v = detail::blob_field(competitor_blobs, y, x);
            if (displaced && spec.planted.contains(y, x)) v = std::max(v, 0.8);
            dense(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
      const std::string stem = std::string(tag) + "/p" + std::to_string(k);
      if (!masks.empty()) {
        pf.masks = stem + "_masks.npy";
        detail::write_instances(out_dir / *pf.masks, masks);
      }
      pf.dense = stem + "_dense.npy";
      write_dense_array(out_dir / *pf.dense, DenseArray::from_plane(dense));
      files.prompts.push_back(std::move(pf));
    }

    RgbImage img = base;
    if (late) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          if (spec.planted.contains(y, x)) img(y, x) = {200.f, 70.f, 60.f};
          const double shift = 60.0 * detail::blob_field(pseudo_blobs, y, x);
          for (auto& c : img(y, x)) c = static_cast<float>(std::clamp(c + shift, 0.0, 255.0));
        }
      }
    }
    files.image = std::string(tag) + "/image.png";
    write_png_rgb(out_dir / files.image, img);

    files.tokens = std::string(tag) + "/tokens.npy";
    (late ? m.date_b : m.date_a) = std::move(files);
  }

  // Geometry tokens: date b rotates every cell whose footprint touches the
  // planted region and optionally jitters the rest.
  const std::size_t rows = spec.token_rows, cols = spec.token_cols, depth = spec.token_depth;
  std::vector<float> tok_a(rows * cols * depth), tok_b;
  for (auto& v : tok_a) v = static_cast<float>(rng.normal());
  tok_b = tok_a;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const Rect cell{r * h / rows, c * w / cols, std::max<std::size_t>(1, (r + 1) * h / rows - r * h / rows),
                      std::max<std::size_t>(1, (c + 1) * w / cols - c * w / cols)};
      float* g = tok_b.data() + (r * cols + c) * depth;
      std::vector<double> u(depth);
      for (auto& v : u) v = rng.normal();
      if (cell.overlaps(spec.planted)) {
        // Rotate g towards a unit direction orthogonal to it; the norm is kept.
        double gg = 0, gu = 0;
        for (std::size_t d = 0; d < depth; ++d) {
          gg += double(g[d]) * g[d];
          gu += double(g[d]) * u[d];
        }
        double un = 0;
        for (std::size_t d = 0; d < depth; ++d) {
          u[d] -= gu / gg * g[d];
          un += u[d] * u[d];
        }
        un = std::sqrt(un);
        const double norm = std::sqrt(gg), th = spec.token_change_magnitude;
        for (std::size_t d = 0; d < depth; ++d) {
          g[d] = static_cast<float>(std::cos(th) * g[d] + std::sin(th) * norm * u[d] / un);
        }
      } else if (spec.token_noise > 0.0) {
        for (std::size_t d = 0; d < depth; ++d) g[d] = static_cast<float>(g[d] + spec.token_noise * u[d]);
      }
    }
  }
  write_dense_array(out_dir / m.date_a.tokens, DenseArray({rows, cols, depth}, tok_a));
  write_dense_array(out_dir / m.date_b.tokens, DenseArray({rows, cols, depth}, tok_b));

  BinaryMask planted(h, w, 0);
  LabelMap sem_a(h, w, 0), sem_b(h, w, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const bool in_fixed = has_fixed && fixed.contains(y, x);
      planted(y, x) = spec.planted.contains(y, x) ? 1 : 0;
      sem_a(y, x) = in_fixed ? 1 : 0;
      sem_b(y, x) = in_fixed || planted(y, x) ? 1 : 0;
    }
  }
  GroundTruthFiles gt{"gt/change.npy", "gt/sem_a.npy", "gt/sem_b.npy", {{vocabulary[q], 1}}};
  write_dense_array(out_dir / gt.change, DenseArray::from_plane(planted));
  write_dense_array(out_dir / *gt.semantic_a, DenseArray::from_plane(sem_a));
  write_dense_array(out_dir / *gt.semantic_b, DenseArray::from_plane(sem_b));
  m.ground_truth = gt;

  const auto manifest_path = out_dir / "manifest.json";
  write_manifest(manifest_path, m);
  return {manifest_path, vocabulary[q], std::move(planted)};
}

}  // namespace coreg
