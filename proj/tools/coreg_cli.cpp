// coreg: open-vocabulary change detection from exported concept scores and
// geometry tokens.
//
//   coreg detect   <manifest.json> --class building [--ablate no_slic,...]
//   coreg evaluate <manifest.json>... | --dataset dataset.json
//   coreg synth    --out-dir fixtures --count 10
//   coreg bench    <manifest.json>... --repetitions 5
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coreg/coreg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

int exit_code_for(coreg::Errc code) {
  switch (code) {
    case coreg::Errc::InvalidConfig:
    case coreg::Errc::UnknownClass:
      return kUsage;
    case coreg::Errc::Internal:
      return kInternal;
    default:
      return kData;
  }
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> ablations;
  std::optional<int> tau_u8;
  std::optional<std::size_t> segments;
  std::string gate_off_mode;
  bool exclude_class_competitors = false;
  std::string out_dir = ".";

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Pipeline config JSON (default: $COREG_CONFIG)");
    app->add_option("--ablate", ablations, "Ablation switches: no_cpc,no_geogate,no_additive,no_slic,no_structfilter")
        ->delimiter(',');
    app->add_option("--tau-u8", tau_u8, "8-bit decision threshold")->check(CLI::Range(0, 255));
    app->add_option("--segments", segments, "SLIC segment count")->check(CLI::PositiveNumber);
    app->add_option("--geogate-off-mode", gate_off_mode, "Gate under no_geogate: constant or passthrough")
        ->check(CLI::IsMember({"constant", "passthrough"}));
    app->add_flag("--exclude-class-competitors", exclude_class_competitors,
                  "Do not count other prompts of the queried class as competitors");
    app->add_option("--out-dir", out_dir, "Output directory");
  }

  coreg::PipelineConfig build() const {
    coreg::PipelineConfig cfg;
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv("COREG_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) cfg = coreg::read_config(path);
    for (const auto& name : ablations) {
      if (!coreg::set_ablation(cfg.ablations, name)) {
        throw coreg::Error(coreg::Errc::InvalidConfig, "unknown ablation '" + name + "'");
      }
    }
    if (tau_u8) cfg.decode.tau_u8 = *tau_u8;
    if (segments) cfg.n_segments = *segments;
    if (gate_off_mode == "passthrough") cfg.gate_off_mode = coreg::GateOffMode::Passthrough;
    if (gate_off_mode == "constant") cfg.gate_off_mode = coreg::GateOffMode::Constant;
    if (exclude_class_competitors) cfg.exclude_class_prompts = true;
    cfg.validate();
    return cfg;
  }
};

json metrics_json(const coreg::Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"iou_c", m.iou}, {"f1_c", m.f1}};
}

json counts_json(const coreg::ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

json timing_json(const coreg::TimingStats& t) {
  return {{"measured_pairs", t.measured},     {"mean_seconds", t.mean_seconds},
          {"median_seconds", t.median_seconds}, {"min_seconds", t.min_seconds},
          {"max_seconds", t.max_seconds},     {"io_mean_seconds", t.io_mean_seconds},
          {"pairs_per_minute", t.pairs_per_minute}, {"peak_rss_bytes", t.peak_rss_bytes}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw coreg::Error(coreg::Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) { coreg::write_file_bytes(path, text); }

/// Manifest paths from positional arguments and/or a dataset file
/// {"pairs": ["relative/manifest.json", ...], "classes": [...]}.
std::vector<fs::path> collect_manifests(const std::vector<std::string>& positional, const std::string& dataset,
                                        std::vector<std::string>& classes) {
  std::vector<fs::path> out(positional.begin(), positional.end());
  if (!dataset.empty()) {
    json j;
    try {
      j = json::parse(coreg::read_file_bytes(dataset));
    } catch (const json::exception& e) {
      throw coreg::Error(coreg::Errc::BadHeader, dataset + ": " + e.what());
    }
    const fs::path base = fs::path(dataset).parent_path();
    for (const auto& p : j.at("pairs")) out.push_back(base / p.get<std::string>());
    if (classes.empty() && j.contains("classes")) classes = j["classes"].get<std::vector<std::string>>();
  }
  if (out.empty()) throw coreg::Error(coreg::Errc::EmptyDataset, "no manifests given");
  return out;
}

/// Run fn(i) for i in [0, n) on a bounded pool; the first failure is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

// ---- detect -----------------------------------------------------------------

struct DetectOptions {
  std::string manifest;
  std::string class_name;
  bool dump = false;
};

int run_detect_cmd(const DetectOptions& opt, const CommonOptions& common) {
  const auto cfg = common.build();
  const fs::path out_dir = common.out_dir;
  ensure_dir(out_dir);

  coreg::PairBundle bundle;
  const double io_seconds = coreg::time_pair([&] { bundle = coreg::load_pair_bundle(fs::path(opt.manifest)); });
  std::string class_name = opt.class_name;
  if (class_name.empty()) {
    const auto names = bundle.manifest.class_names();
    if (names.size() != 1) throw coreg::Error(coreg::Errc::UnknownClass, "--class is required for multi-class manifests");
    class_name = names.front();
  }

  coreg::DetectResult result;
  const double seconds = coreg::time_pair([&] { result = coreg::run_detect(bundle, class_name, cfg); });

  const std::string stem = result.pair_id + "." + class_name;
  coreg::write_png_mask(out_dir / (stem + ".mask.png"), result.mask);
  coreg::write_dense_array(out_dir / (stem + ".mask.npy"), coreg::DenseArray::from_plane(result.mask));
  if (opt.dump) coreg::dump_intermediates(result, out_dir);

  std::size_t positives = 0;
  for (auto v : result.mask) positives += v;
  json report = {{"pair_id", result.pair_id},
                 {"class", class_name},
                 {"prompts", result.prompts},
                 {"config_hash", coreg::config_hash(cfg)},
                 {"config", coreg::config_to_json(cfg)},
                 {"positive_pixels", positives},
                 {"latency_seconds", seconds},
                 {"io_seconds", io_seconds},
                 {"mask", stem + ".mask.png"}};
  if (bundle.ground_truth) {
    const auto counts = coreg::confusion(result.mask, bundle.ground_truth->for_class(class_name));
    report["counts"] = counts_json(counts);
    report["metrics"] = metrics_json(coreg::metrics(counts));
  }
  write_text(out_dir / (stem + ".detect.json"), report.dump(2) + "\n");
  std::cout << result.pair_id << " " << class_name << ": " << positives << " changed pixels, " << std::fixed
            << std::setprecision(3) << seconds << " s\n";
  return kOk;
}

// ---- evaluate -----------------------------------------------------------------

struct EvaluateOptions {
  std::vector<std::string> manifests;
  std::string dataset;
  std::vector<std::string> classes;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::string aggregation = "micro";
  std::string report_name = "report";
  bool save_masks = false;
};

void print_table(const coreg::EvalReport& report, std::ostream& os) {
  os << std::left << std::setw(18) << "Class" << std::right << std::setw(8) << "Pairs" << std::setw(12) << "Prec (%)"
     << std::setw(12) << "Rec (%)" << std::setw(12) << "IoU_C (%)" << std::setw(12) << "F1_C (%)" << "\n";
  os << std::fixed << std::setprecision(2);
  auto row = [&](const std::string& name, std::size_t pairs, const coreg::Metrics& m) {
    os << std::left << std::setw(18) << name << std::right << std::setw(8) << pairs << std::setw(12) << m.precision
       << std::setw(12) << m.recall << std::setw(12) << m.iou << std::setw(12) << m.f1 << "\n";
  };
  for (const auto& c : report.classes) row(c.name, c.pairs, c.metrics);
  if (report.classes.size() > 1) row("Class Avg.", report.pair_count, report.class_average);
}

int run_evaluate_cmd(EvaluateOptions opt, const CommonOptions& common) {
  const auto cfg = common.build();
  const auto manifests = collect_manifests(opt.manifests, opt.dataset, opt.classes);
  const fs::path out_dir = common.out_dir;
  ensure_dir(out_dir);
  const auto mode = opt.aggregation == "macro" ? coreg::Aggregation::Macro : coreg::Aggregation::Micro;

  struct PairOutcome {
    std::string pair_id;
    std::vector<std::pair<std::string, coreg::ConfusionCounts>> per_class;
    double seconds = 0.0;
    double io_seconds = 0.0;
  };
  std::vector<PairOutcome> outcomes(manifests.size());

  parallel_for(manifests.size(), opt.workers, [&](std::size_t i) {
    coreg::PairBundle bundle;
    auto& out = outcomes[i];
    out.io_seconds = coreg::time_pair([&] { bundle = coreg::load_pair_bundle(manifests[i]); });
    if (!bundle.ground_truth) {
      throw coreg::Error(coreg::Errc::MissingGroundTruth, manifests[i].string() + " has no ground_truth entry");
    }
    out.pair_id = bundle.manifest.pair_id;
    const auto classes = opt.classes.empty() ? bundle.manifest.class_names() : opt.classes;
    for (const auto& name : classes) {
      coreg::DetectResult r;
      out.seconds += coreg::time_pair([&] { r = coreg::run_detect(bundle, name, cfg); });
      out.per_class.emplace_back(name, coreg::confusion(r.mask, bundle.ground_truth->for_class(name)));
      if (opt.save_masks) coreg::write_png_mask(out_dir / (r.pair_id + "." + name + ".mask.png"), r.mask);
    }
  });

  std::map<std::string, std::vector<coreg::ConfusionCounts>> per_class;
  std::vector<double> latencies, io;
  json per_pair = json::array();
  for (const auto& o : outcomes) {
    latencies.push_back(o.seconds);
    io.push_back(o.io_seconds);
    for (const auto& [name, counts] : o.per_class) {
      per_class[name].push_back(counts);
      json entry = counts_json(counts);
      entry["pair_id"] = o.pair_id;
      entry["class"] = name;
      per_pair.push_back(entry);
    }
  }
  auto report = coreg::aggregate(per_class, mode);
  report.pair_count = manifests.size();
  report.timing = coreg::summarize_latencies(latencies, 0, io);

  json classes = json::array();
  for (const auto& c : report.classes) {
    json entry = metrics_json(c.metrics);
    entry["name"] = c.name;
    entry["pairs"] = c.pairs;
    entry["counts"] = counts_json(c.counts);
    classes.push_back(entry);
  }
  json j = {{"config_hash", coreg::config_hash(cfg)},
            {"config", coreg::config_to_json(cfg)},
            {"aggregation", opt.aggregation},
            {"pairs", report.pair_count},
            {"classes", classes},
            {"class_average", metrics_json(report.class_average)},
            {"timing", timing_json(report.timing)},
            {"per_pair", per_pair}};
  write_text(out_dir / (opt.report_name + ".json"), j.dump(2) + "\n");

  std::ostringstream csv;
  csv << std::setprecision(10) << "class,pairs,tp,fp,fn,tn,precision,recall,iou_c,f1_c\n";
  for (const auto& c : report.classes) {
    csv << c.name << "," << c.pairs << "," << c.counts.tp << "," << c.counts.fp << "," << c.counts.fn << ","
        << c.counts.tn << "," << c.metrics.precision << "," << c.metrics.recall << "," << c.metrics.iou << ","
        << c.metrics.f1 << "\n";
  }
  const auto& avg = report.class_average;
  csv << "class_average," << report.pair_count << ",,,,," << avg.precision << "," << avg.recall << "," << avg.iou << ","
      << avg.f1 << "\n";
  write_text(out_dir / (opt.report_name + ".csv"), csv.str());

  print_table(report, std::cout);
  return kOk;
}

// ---- synth -----------------------------------------------------------------

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t vocab = 4;
  std::size_t depth = 8;
  std::size_t token_grid = 8;
  double competitor = 0.3;
  double pseudo_noise = 0.0;
  double token_change = 3.141592653589793;
  double token_noise = 0.0;
};

int run_synth_cmd(const SynthOptions& opt, const CommonOptions& common) {
  const fs::path out_dir = common.out_dir;
  ensure_dir(out_dir);
  json pairs = json::array();
  std::string class_name;
  for (std::size_t i = 0; i < opt.count; ++i) {
    auto spec = coreg::default_scene(opt.seed + i, opt.height, opt.width, opt.vocab);
    spec.token_depth = opt.depth;
    spec.token_rows = spec.token_cols = opt.token_grid;
    spec.competitor_strength = opt.competitor;
    spec.pseudo_change_noise = opt.pseudo_noise;
    spec.token_change_magnitude = opt.token_change;
    spec.token_noise = opt.token_noise;
    const std::string name = "scene_" + std::to_string(spec.seed);
    const auto result = coreg::gen_scene(spec, out_dir / name);
    class_name = result.class_name;
    pairs.push_back(name + "/manifest.json");
  }
  const json dataset = {{"pairs", pairs}, {"classes", {class_name}}};
  write_text(out_dir / "dataset.json", dataset.dump(2) + "\n");
  std::cout << "wrote " << opt.count << " scene(s) to " << out_dir.string() << "\n";
  return kOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchOptions {
  std::vector<std::string> manifests;
  std::string class_name;
  std::size_t repetitions = 3;
  std::string report_name = "bench";
};

int run_bench_cmd(const BenchOptions& opt, const CommonOptions& common) {
  const auto cfg = common.build();
  const fs::path out_dir = common.out_dir;
  ensure_dir(out_dir);
  std::vector<double> latencies, io;
  for (std::size_t rep = 0; rep < opt.repetitions; ++rep) {
    for (const auto& path : opt.manifests) {
      coreg::PairBundle bundle;
      io.push_back(coreg::time_pair([&] { bundle = coreg::load_pair_bundle(fs::path(path)); }));
      std::string class_name = opt.class_name;
      if (class_name.empty()) class_name = bundle.manifest.class_names().at(0);
      latencies.push_back(coreg::time_pair([&] { (void)coreg::run_detect(bundle, class_name, cfg); }));
    }
  }
  // The very first pair is the warm-up.
  const auto stats = coreg::summarize_latencies(latencies, 1, io);
  const json j = {{"config_hash", coreg::config_hash(cfg)},
                  {"pairs", opt.manifests.size()},
                  {"repetitions", opt.repetitions},
                  {"warmup_pairs", 1},
                  {"timing", timing_json(stats)}};
  write_text(out_dir / (opt.report_name + ".json"), j.dump(2) + "\n");
  std::cout << std::fixed << std::setprecision(4) << "latency mean " << stats.mean_seconds << " s over "
            << stats.measured << " pair(s), " << std::setprecision(2) << stats.pairs_per_minute
            << " pairs/min, config " << coreg::config_hash(cfg) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary change detection from concept scores and geometry tokens"};
  app.require_subcommand(1);

  CommonOptions detect_common, eval_common, synth_common, bench_common;

  DetectOptions detect;
  auto* detect_cmd = app.add_subcommand("detect", "Predict the change mask of one pair for one class");
  detect_cmd->add_option("manifest", detect.manifest, "Pair manifest JSON")->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--class", detect.class_name, "Queried class (defaults to the manifest's only class)");
  detect_cmd->add_flag("--dump-intermediates", detect.dump, "Write delta/gate/fused/pooled/y0 maps");
  detect_common.attach(detect_cmd);

  EvaluateOptions evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth over a dataset");
  eval_cmd->add_option("manifests", evaluate.manifests, "Pair manifests");
  eval_cmd->add_option("--dataset", evaluate.dataset, "Dataset JSON listing pair manifests")->check(CLI::ExistingFile);
  eval_cmd->add_option("--class", evaluate.classes, "Classes to evaluate (default: all in each manifest)")
      ->delimiter(',');
  eval_cmd->add_option("--workers", evaluate.workers, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--aggregation", evaluate.aggregation, "micro or macro within a class")
      ->check(CLI::IsMember({"micro", "macro"}));
  eval_cmd->add_option("--report-name", evaluate.report_name, "Report file stem");
  eval_cmd->add_flag("--save-masks", evaluate.save_masks, "Write per-pair masks next to the report");
  eval_common.attach(eval_cmd);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic pairs with planted changes");
  synth_cmd->add_option("--seed", synth.seed, "First seed");
  synth_cmd->add_option("--count", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--height", synth.height)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--width", synth.width)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--vocab", synth.vocab, "Vocabulary size K")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--depth", synth.depth, "Token depth D");
  synth_cmd->add_option("--token-grid", synth.token_grid, "Token grid rows and columns")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--competitor", synth.competitor, "Competitor activation strength");
  synth_cmd->add_option("--pseudo-noise", synth.pseudo_noise, "Appearance pseudo-change amplitude");
  synth_cmd->add_option("--token-change", synth.token_change, "Token rotation inside the planted region (rad)");
  synth_cmd->add_option("--token-noise", synth.token_noise, "Token noise outside the planted region");
  synth_cmd->add_option("--out-dir", synth_common.out_dir, "Output directory")->required();

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Measure per-pair latency after a one-pair warm-up");
  bench_cmd->add_option("manifests", bench.manifests, "Pair manifests")->required();
  bench_cmd->add_option("--class", bench.class_name, "Queried class");
  bench_cmd->add_option("--repetitions", bench.repetitions, "Passes over the manifests")->check(CLI::Range(2, 1000000));
  bench_cmd->add_option("--report-name", bench.report_name, "Report file stem");
  bench_common.attach(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*detect_cmd) return run_detect_cmd(detect, detect_common);
    if (*eval_cmd) return run_evaluate_cmd(evaluate, eval_common);
    if (*synth_cmd) return run_synth_cmd(synth, synth_common);
    if (*bench_cmd) return run_bench_cmd(bench, bench_common);
  } catch (const coreg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
