#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"
#include "coreg/score.hpp"

namespace coreg {

/// h x w grid of D-dimensional geometry tokens, stored row-major with the
/// embedding dimension innermost (the (h, w, D) tensor layout).
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t rows, std::size_t cols, std::size_t depth, std::vector<float> data)
      : rows_(rows), cols_(cols), depth_(depth), data_(std::move(data)) {
    if (rows_ == 0 || cols_ == 0 || depth_ == 0) throw Error(Errc::ZeroDimension, "token grid dimensions must be positive");
    if (data_.size() != rows_ * cols_ * depth_) throw Error(Errc::ShapeMismatch, "token buffer size does not match grid");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t depth() const noexcept { return depth_; }
  const std::vector<float>& data() const noexcept { return data_; }

  std::span<const float> token(std::size_t r, std::size_t c) const {
    return std::span<const float>(data_).subspan((r * cols_ + c) * depth_, depth_);
  }

  bool same_layout(const TokenGrid& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_ && depth_ == o.depth_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t depth_ = 0;
  std::vector<float> data_;
};

inline constexpr double kTokenNormFloor = 1e-12;

/// Cosine similarity with the degenerate cases pinned: two vanishing tokens
/// agree (1), one vanishing token is uninformative (0).
inline double token_cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  const bool a_zero = na < kTokenNormFloor, b_zero = nb < kTokenNormFloor;
  if (a_zero && b_zero) return 1.0;
  if (a_zero || b_zero) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

/// Token-resolution gate G(u) = (1 - cos(g_a(u), g_b(u))) / 2.
inline ScoreMap gate_from_tokens(const TokenGrid& a, const TokenGrid& b) {
  if (!a.same_layout(b)) {
    throw Error(Errc::ShapeMismatch, "token grids differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                         "x" + std::to_string(a.depth()) + " vs " + std::to_string(b.rows()) + "x" +
                                         std::to_string(b.cols()) + "x" + std::to_string(b.depth()));
  }
  ScoreMap gate(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) gate(r, c) = 0.5 * (1.0 - token_cosine(a.token(r, c), b.token(r, c)));
  }
  return gate;
}

/// Bilinear upsampling to the pixel grid, clamped to [0,1].
inline ScoreMap upsample_gate(const ScoreMap& gate, std::size_t height, std::size_t width) {
  ScoreMap out = to_pixel_grid(gate, height, width);
  for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace coreg
