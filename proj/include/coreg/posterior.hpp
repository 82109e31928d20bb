#pragma once

// Competitive posterior calibration and the cross-date posterior delta.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"
#include "coreg/score.hpp"

namespace coreg {

struct CalibrationConfig {
  double rho = 1.5;
  double epsilon = 1e-6;
  /// When false the raw queried score is passed through uncalibrated.
  bool competitive = true;

  void validate() const {
    if (!(rho >= 0.0)) throw Error(Errc::InvalidConfig, "rho must be >= 0");
    if (!(epsilon > 0.0)) throw Error(Errc::InvalidConfig, "epsilon must be > 0");
  }
};

/// Scalar calibration kernel: s * (s / (s + m + eps))^rho.
/// The dominance ratio is < 1, so the result never exceeds s.
inline double calibrate_value(double s, double m, const CalibrationConfig& cfg) {
  if (!cfg.competitive || cfg.rho == 0.0) return s;
  if (s <= 0.0) return 0.0;
  return s * std::pow(s / (s + m + cfg.epsilon), cfg.rho);
}

namespace detail {
inline void check_prompt(const ScoreStack& stack, std::size_t q) {
  if (q >= stack.prompt_count()) {
    throw Error(Errc::IndexOutOfRange, "prompt index " + std::to_string(q) + " outside vocabulary of " +
                                           std::to_string(stack.prompt_count()));
  }
}
}  // namespace detail

/// Per-pixel maximum over every prompt except q and those in `excluded`.
/// An empty competitor set yields zero.
inline ScoreMap strongest_competitor(const ScoreStack& stack, std::size_t q,
                                     const std::vector<std::size_t>& excluded = {}) {
  detail::check_prompt(stack, q);
  ScoreMap out(stack.height(), stack.width(), 0.0);
  for (std::size_t k = 0; k < stack.prompt_count(); ++k) {
    if (k == q || std::find(excluded.begin(), excluded.end(), k) != excluded.end()) continue;
    const auto& s = stack[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], s[i]);
  }
  return out;
}

inline ScoreMap calibrate(const ScoreStack& stack, std::size_t q, const CalibrationConfig& cfg,
                          const std::vector<std::size_t>& excluded = {}) {
  detail::check_prompt(stack, q);
  const auto& s = stack[q];
  if (!cfg.competitive) return s;
  const ScoreMap m = strongest_competitor(stack, q, excluded);
  ScoreMap p(s.height(), s.width());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = calibrate_value(s[i], m[i], cfg);
  return p;
}

/// |P_a - P_b|, the total-variation distance between two Bernoulli posteriors.
inline ScoreMap posterior_delta(const ScoreMap& p_a, const ScoreMap& p_b) {
  require_same_shape(p_a, p_b, "posterior_delta");
  ScoreMap d(p_a.height(), p_a.width());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(p_a[i] - p_b[i]);
  return d;
}

/// Max over the class prompt set of per-prompt calibrated deltas. Each prompt
/// is calibrated as the queried concept against the rest of the vocabulary;
/// with `exclude_class_prompts` the other members of the set are not counted
/// as competitors.
inline ScoreMap aggregate_prompt_deltas(const ScoreStack& stack_a, const ScoreStack& stack_b,
                                        const std::vector<std::size_t>& prompts, const CalibrationConfig& cfg,
                                        bool exclude_class_prompts = false) {
  if (prompts.empty()) throw Error(Errc::EmptyPromptSet, "class prompt set is empty");
  if (stack_a.prompt_count() != stack_b.prompt_count()) {
    throw Error(Errc::ShapeMismatch, "score stacks have different vocabulary sizes");
  }
  if (stack_a.prompt_count() > 0) require_same_shape(stack_a[0], stack_b[0], "aggregate_prompt_deltas");
  for (auto p : prompts) detail::check_prompt(stack_a, p);

  ScoreMap out(stack_a.height(), stack_a.width(), 0.0);
  const std::vector<std::size_t> none;
  for (auto p : prompts) {
    const auto& excluded = exclude_class_prompts ? prompts : none;
    const ScoreMap d = posterior_delta(calibrate(stack_a, p, cfg, excluded), calibrate(stack_b, p, cfg, excluded));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], d[i]);
  }
  return out;
}

}  // namespace coreg
