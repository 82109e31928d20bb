#pragma once

// End-to-end inference for one image pair and one queried class:
//   scores -> calibrated prompt-set delta -> geometry gate -> gated fusion
//   -> clip -> superpixel pooling -> 8-bit threshold -> structural filter.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coreg/consensus.hpp"
#include "coreg/decode.hpp"
#include "coreg/error.hpp"
#include "coreg/geogate.hpp"
#include "coreg/image.hpp"
#include "coreg/manifest.hpp"
#include "coreg/posterior.hpp"
#include "coreg/score.hpp"
#include "coreg/slic.hpp"
#include "coreg/tensorio.hpp"

namespace coreg {

struct Ablations {
  bool no_cpc = false;
  bool no_geogate = false;
  bool no_additive = false;
  bool no_slic = false;
  bool no_structfilter = false;

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

inline constexpr std::string_view kAblationNames[] = {"no_cpc", "no_geogate", "no_additive", "no_slic",
                                                       "no_structfilter"};

/// Set the named switch; returns false for an unknown name.
inline bool set_ablation(Ablations& a, std::string_view name) {
  if (name == "no_cpc") a.no_cpc = true;
  else if (name == "no_geogate") a.no_geogate = true;
  else if (name == "no_additive") a.no_additive = true;
  else if (name == "no_slic") a.no_slic = true;
  else if (name == "no_structfilter") a.no_structfilter = true;
  else return false;
  return true;
}

/// How the gate is neutralised under no_geogate.
enum class GateOffMode {
  Constant,     // G = 1 everywhere: fusion reduces to delta + alpha, then clipped
  Passthrough,  // G = 0 with beta = 0: fusion reduces to delta
};

struct PipelineConfig {
  RetentionConfig retention;
  CalibrationConfig calibration;
  FusionConfig fusion;
  SlicConfig slic;
  /// Unset scales 256 segments at 512x512 by image area.
  std::optional<std::size_t> n_segments;
  DecodeConfig decode;
  Ablations ablations;
  GateOffMode gate_off_mode = GateOffMode::Constant;
  bool exclude_class_prompts = false;
  /// Class name -> prompt strings; overrides the manifest's prompt sets.
  std::map<std::string, std::vector<std::string>> prompt_banks;

  void validate() const {
    retention.validate();
    calibration.validate();
    fusion.validate();
    decode.validate();
    SlicConfig s = slic;
    s.n_segments = n_segments.value_or(1);
    s.validate();
  }

  SlicConfig resolved_slic(std::size_t height, std::size_t width) const {
    SlicConfig s = slic;
    if (n_segments) {
      s.n_segments = *n_segments;
    } else {
      const double scaled = 256.0 * static_cast<double>(height * width) / static_cast<double>(kReferenceArea);
      s.n_segments = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scaled)));
    }
    return s;
  }

  /// Prompt indices for a class: config bank first, then the manifest's
  /// prompt set, then a vocabulary entry with the class's own name.
  std::vector<std::size_t> resolve_prompts(const PairManifest& m, const std::string& class_name) const {
    if (const auto it = prompt_banks.find(class_name); it != prompt_banks.end()) {
      std::vector<std::size_t> idx;
      for (const auto& prompt : it->second) {
        const auto pos = std::find(m.vocabulary.begin(), m.vocabulary.end(), prompt);
        if (pos == m.vocabulary.end()) {
          throw Error(Errc::UnknownClass, "prompt '" + prompt + "' of class '" + class_name + "' not in vocabulary");
        }
        idx.push_back(static_cast<std::size_t>(pos - m.vocabulary.begin()));
      }
      if (idx.empty()) throw Error(Errc::EmptyPromptSet, "prompt bank for '" + class_name + "' is empty");
      return idx;
    }
    if (m.prompt_sets.count(class_name)) return m.prompts_for(class_name);
    const auto pos = std::find(m.vocabulary.begin(), m.vocabulary.end(), class_name);
    if (pos != m.vocabulary.end()) return {static_cast<std::size_t>(pos - m.vocabulary.begin())};
    throw Error(Errc::UnknownClass, "class '" + class_name + "' has no prompt set in " + m.pair_id);
  }
};

// ---- Config JSON ----------------------------------------------------------

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["retention"] = {{"confidence_threshold", c.retention.confidence_threshold}, {"top_r", c.retention.top_r}};
  j["calibration"] = {{"rho", c.calibration.rho}, {"epsilon", c.calibration.epsilon}};
  j["fusion"] = {{"alpha", c.fusion.additive_weight}, {"beta", c.fusion.gate_strength}, {"gamma", c.fusion.gate_exponent}};
  j["slic"] = {{"n_segments", c.n_segments ? nlohmann::json(*c.n_segments) : nlohmann::json(nullptr)},
               {"compactness", c.slic.compactness},
               {"iterations", c.slic.iterations},
               {"min_region_fraction", c.slic.min_region_fraction}};
  j["decode"] = {{"tau_u8", c.decode.tau_u8},
                 {"opening_radius", c.decode.opening_radius},
                 {"closing_radius", c.decode.closing_radius},
                 {"min_component_area", c.decode.min_component_area ? nlohmann::json(*c.decode.min_component_area)
                                                                   : nlohmann::json(nullptr)}};
  nlohmann::json ablate = nlohmann::json::array();
  const Ablations& a = c.ablations;
  const bool flags[] = {a.no_cpc, a.no_geogate, a.no_additive, a.no_slic, a.no_structfilter};
  for (std::size_t i = 0; i < 5; ++i) {
    if (flags[i]) ablate.push_back(kAblationNames[i]);
  }
  j["ablations"] = ablate;
  j["gate_off_mode"] = c.gate_off_mode == GateOffMode::Constant ? "constant" : "passthrough";
  j["exclude_class_prompts"] = c.exclude_class_prompts;
  j["prompt_banks"] = c.prompt_banks;
  return j;
}

namespace detail {
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
  }
}
}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    detail::reject_unknown_keys(j, {"retention", "calibration", "fusion", "slic", "decode", "ablations", "gate_off_mode",
                                    "exclude_class_prompts", "prompt_banks"},
                                "config");
    if (j.contains("retention")) {
      const auto& r = j["retention"];
      detail::reject_unknown_keys(r, {"confidence_threshold", "top_r"}, "retention");
      c.retention.confidence_threshold = r.value("confidence_threshold", c.retention.confidence_threshold);
      c.retention.top_r = r.value("top_r", c.retention.top_r);
    }
    if (j.contains("calibration")) {
      const auto& r = j["calibration"];
      detail::reject_unknown_keys(r, {"rho", "epsilon"}, "calibration");
      c.calibration.rho = r.value("rho", c.calibration.rho);
      c.calibration.epsilon = r.value("epsilon", c.calibration.epsilon);
    }
    if (j.contains("fusion")) {
      const auto& r = j["fusion"];
      detail::reject_unknown_keys(r, {"alpha", "beta", "gamma"}, "fusion");
      c.fusion.additive_weight = r.value("alpha", c.fusion.additive_weight);
      c.fusion.gate_strength = r.value("beta", c.fusion.gate_strength);
      c.fusion.gate_exponent = r.value("gamma", c.fusion.gate_exponent);
    }
    if (j.contains("slic")) {
      const auto& r = j["slic"];
      detail::reject_unknown_keys(r, {"n_segments", "compactness", "iterations", "min_region_fraction"}, "slic");
      if (r.contains("n_segments") && !r["n_segments"].is_null()) c.n_segments = r["n_segments"].get<std::size_t>();
      c.slic.compactness = r.value("compactness", c.slic.compactness);
      c.slic.iterations = r.value("iterations", c.slic.iterations);
      c.slic.min_region_fraction = r.value("min_region_fraction", c.slic.min_region_fraction);
    }
    if (j.contains("decode")) {
      const auto& r = j["decode"];
      detail::reject_unknown_keys(r, {"tau_u8", "opening_radius", "closing_radius", "min_component_area"}, "decode");
      c.decode.tau_u8 = r.value("tau_u8", c.decode.tau_u8);
      c.decode.opening_radius = r.value("opening_radius", c.decode.opening_radius);
      c.decode.closing_radius = r.value("closing_radius", c.decode.closing_radius);
      if (r.contains("min_component_area") && !r["min_component_area"].is_null()) {
        c.decode.min_component_area = r["min_component_area"].get<std::size_t>();
      }
    }
    if (j.contains("ablations")) {
      for (const auto& name : j["ablations"].get<std::vector<std::string>>()) {
        if (!set_ablation(c.ablations, name)) throw Error(Errc::InvalidConfig, "unknown ablation '" + name + "'");
      }
    }
    if (j.contains("gate_off_mode")) {
      const auto mode = j["gate_off_mode"].get<std::string>();
      if (mode == "constant") c.gate_off_mode = GateOffMode::Constant;
      else if (mode == "passthrough") c.gate_off_mode = GateOffMode::Passthrough;
      else throw Error(Errc::InvalidConfig, "gate_off_mode must be 'constant' or 'passthrough'");
    }
    c.exclude_class_prompts = j.value("exclude_class_prompts", c.exclude_class_prompts);
    if (j.contains("prompt_banks")) {
      c.prompt_banks = j["prompt_banks"].get<std::map<std::string, std::vector<std::string>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig read_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(read_file_bytes(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

/// FNV-1a 64 over the canonical (key-sorted) JSON form, as 16 hex digits.
inline std::string config_hash(const PipelineConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- Inference --------------------------------------------------------------

struct DetectResult {
  std::string pair_id;
  std::string class_name;
  std::vector<std::size_t> prompts;
  ScoreMap delta;
  ScoreMap gate;
  ScoreMap fused;
  ScoreMap clipped;
  LabelMap labels;  // empty under no_slic
  ScoreMap pooled;
  BinaryMask y0;
  BinaryMask mask;
};

inline DetectResult run_detect(const PairBundle& bundle, const std::string& class_name, const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t h = bundle.height(), w = bundle.width();
  const Ablations& ab = cfg.ablations;

  DetectResult r;
  r.pair_id = bundle.manifest.pair_id;
  r.class_name = class_name;
  r.prompts = cfg.resolve_prompts(bundle.manifest, class_name);

  const ScoreStack stack_a = build_score_stack(bundle.a.evidence, h, w, cfg.retention);
  const ScoreStack stack_b = build_score_stack(bundle.b.evidence, h, w, cfg.retention);

  CalibrationConfig calibration = cfg.calibration;
  calibration.competitive = !ab.no_cpc;
  r.delta = aggregate_prompt_deltas(stack_a, stack_b, r.prompts, calibration, cfg.exclude_class_prompts);

  FusionConfig fusion = cfg.fusion;
  if (ab.no_additive) fusion.additive_weight = 0.0;
  if (!ab.no_geogate) {
    r.gate = upsample_gate(gate_from_tokens(bundle.a.tokens, bundle.b.tokens), h, w);
  } else if (cfg.gate_off_mode == GateOffMode::Constant) {
    r.gate = ScoreMap(h, w, 1.0);
  } else {
    r.gate = ScoreMap(h, w, 0.0);
    fusion.gate_strength = 0.0;
    fusion.additive_weight = 0.0;
  }

  r.fused = fuse(r.delta, r.gate, fusion);
  r.clipped = clip_unit(r.fused);

  if (ab.no_slic) {
    r.pooled = r.clipped;
  } else {
    r.labels = slic_segment(average_image(bundle.a.image, bundle.b.image), cfg.resolved_slic(h, w));
    r.pooled = regional_pool(r.clipped, r.labels);
  }

  r.y0 = quantize_and_threshold(r.pooled, cfg.decode.tau_u8);
  r.mask = ab.no_structfilter ? r.y0 : struct_filter(r.y0, cfg.decode);
  return r;
}

/// Write {pair_id}.{stage}.npy for delta, gate, fused, pooled and y0.
inline void dump_intermediates(const DetectResult& r, const std::filesystem::path& dir) {
  auto f32 = [](const ScoreMap& m) { return DenseArray::from_plane(plane_cast<float>(m)); };
  write_dense_array(dir / (r.pair_id + ".delta.npy"), f32(r.delta));
  write_dense_array(dir / (r.pair_id + ".gate.npy"), f32(r.gate));
  write_dense_array(dir / (r.pair_id + ".fused.npy"), f32(r.fused));
  write_dense_array(dir / (r.pair_id + ".pooled.npy"), f32(r.pooled));
  write_dense_array(dir / (r.pair_id + ".y0.npy"), DenseArray::from_plane(r.y0));
  if (!r.labels.empty()) write_dense_array(dir / (r.pair_id + ".labels.npy"), DenseArray::from_plane(r.labels));
}

}  // namespace coreg
