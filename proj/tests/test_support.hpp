#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "coreg/image.hpp"

namespace coreg::testing {

/// Fresh scratch directory under $COREG_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("COREG_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "coreg_tests";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ScoreMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScoreMap m(h, w);
  for (auto& v : m) v = u(rng);
  return m;
}

inline BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.5) {
  std::bernoulli_distribution b(p);
  BinaryMask m(h, w);
  for (auto& v : m) v = b(rng) ? 1 : 0;
  return m;
}

/// Random natural-looking image: a blend of coloured Gaussian blobs over a
/// random base colour, plus mild per-pixel noise.
inline RgbImage random_scene_image(std::mt19937_64& rng, std::size_t h, std::size_t w, int blobs = 10,
                                   float noise_sd = 6.0f) {
  std::uniform_real_distribution<float> col(0.f, 255.f), pos(0.f, 1.f);
  std::normal_distribution<float> n(0.f, noise_sd);
  RgbImage img(h, w, Rgb{col(rng), col(rng), col(rng)});
  for (int b = 0; b < blobs; ++b) {
    const Rgb c{col(rng), col(rng), col(rng)};
    const float cy = pos(rng) * h, cx = pos(rng) * w;
    const float r = (0.08f + 0.25f * pos(rng)) * static_cast<float>(std::min(h, w));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const float dy = y - cy, dx = x - cx;
        const float a = std::exp(-(dy * dy + dx * dx) / (2 * r * r));
        for (int k = 0; k < 3; ++k) img(y, x)[k] = (1 - a) * img(y, x)[k] + a * c[k];
      }
    }
  }
  for (auto& p : img) {
    for (auto& v : p) v = std::clamp(v + n(rng), 0.f, 255.f);
  }
  return img;
}

}  // namespace coreg::testing
