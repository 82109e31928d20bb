#pragma once

// Pair manifests: a JSON document naming, per date, the per-prompt instance
// masks and confidences, optional dense concept maps, the geometry token grid
// and the RGB image. Paths are relative to the manifest's directory.
//
//   {
//     "format": "coreg-pair-v1",
//     "pair_id": "scene_000",
//     "height": 64, "width": 64,
//     "vocabulary": ["building", "tree"],
//     "prompt_sets": {"building": [0]},
//     "dates": {
//       "a": {"prompts": [{"masks": "a/p0_masks.npy", "confidences": [0.9],
//                          "dense": "a/p0_dense.npy"}, ...],
//             "tokens": "a/tokens.npy", "image": "a/image.png"},
//       "b": {...}
//     },
//     "ground_truth": {"change": "gt/change.npy", "semantic_a": "gt/sem_a.npy",
//                      "semantic_b": "gt/sem_b.npy", "class_ids": {"building": 1}}
//   }
//
// masks: float32 (N, h, w) at native resolution, one slice per confidence.
// dense: float32 (h, w), upsampled to the pixel grid when smaller.
// tokens: float32 (rows, cols, D). image: PNG, or (H, W, 3) uint8/float32.
// change / semantic maps: uint8 or int32 (H, W), or a PNG for change.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/geogate.hpp"
#include "coreg/image.hpp"
#include "coreg/png_io.hpp"
#include "coreg/score.hpp"
#include "coreg/tensorio.hpp"

namespace coreg {

inline constexpr const char* kManifestFormat = "coreg-pair-v1";
inline constexpr double kScoreTolerance = 1e-6;

struct PromptFiles {
  std::optional<std::string> masks;
  std::vector<double> confidences;
  std::optional<std::string> dense;
};

struct DateFiles {
  std::vector<PromptFiles> prompts;
  std::string tokens;
  std::string image;
};

struct GroundTruthFiles {
  std::string change;
  std::optional<std::string> semantic_a;
  std::optional<std::string> semantic_b;
  std::map<std::string, std::int32_t> class_ids;
};

struct PairManifest {
  std::filesystem::path base_dir;
  std::string pair_id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> vocabulary;
  std::map<std::string, std::vector<std::size_t>> prompt_sets;
  DateFiles date_a;
  DateFiles date_b;
  std::optional<GroundTruthFiles> ground_truth;

  std::size_t prompt_count() const noexcept { return vocabulary.size(); }

  const std::vector<std::size_t>& prompts_for(const std::string& class_name) const {
    const auto it = prompt_sets.find(class_name);
    if (it == prompt_sets.end()) throw Error(Errc::UnknownClass, "class '" + class_name + "' not in manifest " + pair_id);
    return it->second;
  }

  std::vector<std::string> class_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : prompt_sets) names.push_back(k);
    return names;
  }

  /// Structural checks that need no file access.
  void validate() const {
    if (height == 0 || width == 0) throw Error(Errc::ShapeMismatch, "manifest image size must be positive");
    if (vocabulary.empty()) throw Error(Errc::InvalidConfig, "manifest vocabulary is empty");
    for (const auto& [name, prompts] : prompt_sets) {
      if (prompts.empty()) throw Error(Errc::EmptyPromptSet, "class '" + name + "' has no prompts");
      for (auto p : prompts) {
        if (p >= vocabulary.size()) {
          throw Error(Errc::IndexOutOfRange, "class '" + name + "' names prompt " + std::to_string(p) +
                                                 " but vocabulary has " + std::to_string(vocabulary.size()));
        }
      }
    }
    for (const DateFiles* d : {&date_a, &date_b}) {
      if (d->prompts.size() != vocabulary.size()) {
        throw Error(Errc::ShapeMismatch, "date lists " + std::to_string(d->prompts.size()) + " prompts, vocabulary has " +
                                             std::to_string(vocabulary.size()));
      }
      for (const auto& p : d->prompts) {
        if (!p.masks && !p.confidences.empty()) throw Error(Errc::ShapeMismatch, "confidences given without masks");
      }
    }
  }
};

// ---- JSON ---------------------------------------------------------------

inline void to_json(nlohmann::json& j, const PromptFiles& p) {
  j = nlohmann::json::object();
  if (p.masks) j["masks"] = *p.masks;
  j["confidences"] = p.confidences;
  if (p.dense) j["dense"] = *p.dense;
}

inline void from_json(const nlohmann::json& j, PromptFiles& p) {
  if (j.contains("masks") && !j["masks"].is_null()) p.masks = j["masks"].get<std::string>();
  if (j.contains("confidences")) p.confidences = j["confidences"].get<std::vector<double>>();
  if (j.contains("dense") && !j["dense"].is_null()) p.dense = j["dense"].get<std::string>();
}

inline void to_json(nlohmann::json& j, const DateFiles& d) {
  j = {{"prompts", d.prompts}, {"tokens", d.tokens}, {"image", d.image}};
}

inline void from_json(const nlohmann::json& j, DateFiles& d) {
  d.prompts = j.at("prompts").get<std::vector<PromptFiles>>();
  d.tokens = j.at("tokens").get<std::string>();
  d.image = j.at("image").get<std::string>();
}

inline nlohmann::json manifest_to_json(const PairManifest& m) {
  nlohmann::json j;
  j["format"] = kManifestFormat;
  j["pair_id"] = m.pair_id;
  j["height"] = m.height;
  j["width"] = m.width;
  j["vocabulary"] = m.vocabulary;
  j["prompt_sets"] = m.prompt_sets;
  j["dates"] = {{"a", m.date_a}, {"b", m.date_b}};
  if (m.ground_truth) {
    const auto& g = *m.ground_truth;
    nlohmann::json gt = {{"change", g.change}, {"class_ids", g.class_ids}};
    if (g.semantic_a) gt["semantic_a"] = *g.semantic_a;
    if (g.semantic_b) gt["semantic_b"] = *g.semantic_b;
    j["ground_truth"] = gt;
  }
  return j;
}

inline PairManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    if (j.value("format", std::string(kManifestFormat)) != kManifestFormat) {
      throw Error(Errc::BadHeader, "unknown manifest format '" + j["format"].get<std::string>() + "'");
    }
    PairManifest m;
    m.base_dir = base_dir;
    m.pair_id = j.value("pair_id", std::string("pair"));
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.prompt_sets = j.at("prompt_sets").get<std::map<std::string, std::vector<std::size_t>>>();
    m.date_a = j.at("dates").at("a").get<DateFiles>();
    m.date_b = j.at("dates").at("b").get<DateFiles>();
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      const auto& g = j["ground_truth"];
      GroundTruthFiles gt;
      gt.change = g.at("change").get<std::string>();
      if (g.contains("semantic_a")) gt.semantic_a = g["semantic_a"].get<std::string>();
      if (g.contains("semantic_b")) gt.semantic_b = g["semantic_b"].get<std::string>();
      if (g.contains("class_ids")) gt.class_ids = g["class_ids"].get<std::map<std::string, std::int32_t>>();
      if (gt.semantic_a.has_value() != gt.semantic_b.has_value()) {
        throw Error(Errc::BadHeader, "ground truth needs both semantic maps or neither");
      }
      m.ground_truth = gt;
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadHeader, std::string("manifest: ") + e.what());
  }
}

inline PairManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::MissingFile, path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadHeader, path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline void write_manifest(const std::filesystem::path& path, const PairManifest& m) {
  write_file_bytes(path, manifest_to_json(m).dump(2) + "\n");
}

// ---- Bundle -------------------------------------------------------------

struct DateInputs {
  DateEvidence evidence;
  TokenGrid tokens;
  RgbImage image;
};

struct GroundTruth {
  BinaryMask change;
  std::optional<LabelMap> semantic_a;
  std::optional<LabelMap> semantic_b;
  std::map<std::string, std::int32_t> class_ids;

  /// Class-level target: the change map restricted to pixels where the class
  /// is present at either date. Without semantic maps (single-class datasets)
  /// the change map itself is the target.
  BinaryMask for_class(const std::string& name) const {
    if (!semantic_a || !semantic_b) return change;
    const auto it = class_ids.find(name);
    if (it == class_ids.end()) throw Error(Errc::MissingGroundTruth, "no class id for '" + name + "'");
    return derive_class_gt(*semantic_a, *semantic_b, change, it->second);
  }
};

/// Everything one pair needs in memory, validated against the manifest.
struct PairBundle {
  PairManifest manifest;
  DateInputs a;
  DateInputs b;
  std::optional<GroundTruth> ground_truth;

  std::size_t height() const noexcept { return manifest.height; }
  std::size_t width() const noexcept { return manifest.width; }
};

namespace detail {

// Clamp values within the tolerance band into [0,1]; reject anything beyond it.
inline void check_unit_range(std::vector<float>& v, const std::string& what) {
  for (auto& x : v) {
    if (x < -kScoreTolerance || x > 1.0 + kScoreTolerance) {
      throw Error(Errc::ValueOutOfRange, what + " has value " + std::to_string(x) + " outside [0,1]");
    }
    x = std::clamp(x, 0.0f, 1.0f);
  }
}

inline std::vector<InstanceRecord> load_instances(const std::filesystem::path& base, const PromptFiles& p,
                                                  const std::string& what) {
  std::vector<InstanceRecord> out;
  if (!p.masks) return out;
  const auto arr = read_dense_array(base / *p.masks);
  if (arr.ndim() != 3) throw Error(Errc::ShapeMismatch, what + ": masks must be (N, h, w)");
  const auto& s = arr.shape();
  if (s[0] != p.confidences.size()) {
    throw Error(Errc::ShapeMismatch, what + ": " + std::to_string(s[0]) + " masks but " +
                                         std::to_string(p.confidences.size()) + " confidences");
  }
  auto values = arr.values<float>();
  check_unit_range(values, what + " masks");
  const std::size_t plane = s[1] * s[2];
  for (std::size_t i = 0; i < s[0]; ++i) {
    double conf = p.confidences[i];
    if (!(conf >= -kScoreTolerance && conf <= 1.0 + kScoreTolerance)) {
      throw Error(Errc::ValueOutOfRange, what + ": confidence " + std::to_string(conf) + " outside [0,1]");
    }
    conf = std::clamp(conf, 0.0, 1.0);
    std::vector<float> mask(values.begin() + static_cast<std::ptrdiff_t>(i * plane),
                            values.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane));
    out.push_back({Plane<float>(s[1], s[2], std::move(mask)), conf});
  }
  return out;
}

inline RgbImage load_image(const std::filesystem::path& path) {
  if (path.extension() == ".png") return read_png_rgb(path);
  const auto arr = read_dense_array(path);
  if (arr.ndim() != 3 || arr.shape()[2] != 3) throw Error(Errc::ShapeMismatch, path.string() + ": image must be (H, W, 3)");
  const auto v = arr.as_doubles();
  RgbImage img(arr.shape()[0], arr.shape()[1]);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = {static_cast<float>(v[3 * i]), static_cast<float>(v[3 * i + 1]), static_cast<float>(v[3 * i + 2])};
  }
  return img;
}

inline LabelMap load_label_map(const std::filesystem::path& path) {
  const auto arr = read_dense_array(path);
  if (arr.ndim() != 2) throw Error(Errc::ShapeMismatch, path.string() + ": label map must be 2-D");
  if (arr.holds<std::int32_t>()) return arr.to_plane<std::int32_t>();
  if (arr.holds<std::uint8_t>()) return plane_cast<std::int32_t>(arr.to_plane<std::uint8_t>());
  throw Error(Errc::UnsupportedDtype, path.string() + ": label map must be uint8 or int32");
}

inline BinaryMask load_binary_map(const std::filesystem::path& path) {
  if (path.extension() == ".png") return read_png_mask(path);
  const auto labels = load_label_map(path);
  BinaryMask out(labels.height(), labels.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i] != 0 ? 1 : 0;
  return out;
}

template <typename T>
void require_pixel_grid(const Plane<T>& p, const PairManifest& m, const std::string& what) {
  if (p.height() != m.height || p.width() != m.width) {
    throw Error(Errc::ShapeMismatch, what + " is " + std::to_string(p.height()) + "x" + std::to_string(p.width()) +
                                         ", manifest declares " + std::to_string(m.height) + "x" +
                                         std::to_string(m.width));
  }
}

inline DateInputs load_date(const PairManifest& m, const DateFiles& files, const std::string& tag) {
  DateInputs d;
  const auto& base = m.base_dir;
  bool any_dense = false;
  for (const auto& p : files.prompts) any_dense = any_dense || p.dense.has_value();
  for (std::size_t k = 0; k < files.prompts.size(); ++k) {
    const auto what = "date " + tag + " prompt " + std::to_string(k);
    d.evidence.instances.push_back(load_instances(base, files.prompts[k], what));
    if (!any_dense) continue;
    std::optional<Plane<float>> dense;
    if (files.prompts[k].dense) {
      const auto arr = read_dense_array(base / *files.prompts[k].dense);
      auto values = arr.values<float>();
      check_unit_range(values, what + " dense map");
      if (arr.ndim() != 2) throw Error(Errc::ShapeMismatch, what + ": dense map must be 2-D");
      dense = Plane<float>(arr.shape()[0], arr.shape()[1], std::move(values));
    }
    d.evidence.dense.push_back(std::move(dense));
  }

  const auto tokens = read_dense_array(base / files.tokens);
  if (tokens.ndim() != 3) throw Error(Errc::ShapeMismatch, "date " + tag + ": token grid must be (rows, cols, D)");
  d.tokens = TokenGrid(tokens.shape()[0], tokens.shape()[1], tokens.shape()[2], tokens.values<float>());

  d.image = load_image(base / files.image);
  require_pixel_grid(d.image, m, "date " + tag + " image");
  return d;
}

}  // namespace detail

/// Resolve every file of a manifest. Either a complete bundle is returned or a
/// typed error is thrown; nothing partial escapes.
inline PairBundle load_pair_bundle(const PairManifest& manifest) {
  manifest.validate();
  PairBundle bundle;
  bundle.manifest = manifest;
  bundle.a = detail::load_date(manifest, manifest.date_a, "a");
  bundle.b = detail::load_date(manifest, manifest.date_b, "b");
  if (!bundle.a.tokens.same_layout(bundle.b.tokens)) {
    throw Error(Errc::ShapeMismatch, "token grids differ between dates");
  }
  if (manifest.ground_truth) {
    const auto& g = *manifest.ground_truth;
    GroundTruth gt;
    gt.change = detail::load_binary_map(manifest.base_dir / g.change);
    detail::require_pixel_grid(gt.change, manifest, "change ground truth");
    if (g.semantic_a) {
      gt.semantic_a = detail::load_label_map(manifest.base_dir / *g.semantic_a);
      gt.semantic_b = detail::load_label_map(manifest.base_dir / *g.semantic_b);
      detail::require_pixel_grid(*gt.semantic_a, manifest, "semantic map a");
      detail::require_pixel_grid(*gt.semantic_b, manifest, "semantic map b");
    }
    gt.class_ids = g.class_ids;
    bundle.ground_truth = std::move(gt);
  }
  return bundle;
}

inline PairBundle load_pair_bundle(const std::filesystem::path& manifest_path) {
  return load_pair_bundle(read_manifest(manifest_path));
}

}  // namespace coreg
