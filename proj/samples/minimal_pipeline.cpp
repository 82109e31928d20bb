// Generate one synthetic pair, run the detector on it and report overlap with
// the planted change.

#include <filesystem>
#include <iostream>

#include "coreg/coreg.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "minimal_pipeline_scene";
  const auto scene = coreg::gen_scene(coreg::default_scene(7, 128, 128, 4), dir);

  coreg::PipelineConfig cfg;
  cfg.n_segments = 128;
  const auto bundle = coreg::load_pair_bundle(scene.manifest_path);
  const auto result = coreg::run_detect(bundle, scene.class_name, cfg);

  const auto m = coreg::metrics(coreg::confusion(result.mask, scene.planted));
  std::cout << "class " << scene.class_name << ": IoU_C " << m.iou << " %, F1_C " << m.f1 << " %\n";
  return 0;
}
