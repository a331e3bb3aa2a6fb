#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "pollitrack/dataset_io.hpp"
#include "pollitrack/errors.hpp"
#include "pollitrack/pipeline.hpp"
#include "pollitrack/report.hpp"
#include "pollitrack/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pollitrack;

namespace {

struct GlobalOptions {
  bool json = false;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }

/// Adds one --<key> option per engine config key.
void add_config_flags(CLI::App* app, std::map<std::string, std::string>& overrides) {
  for (const auto& key : config_keys()) {
    app->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
        "override " + key);
  }
}

int run_track(const GlobalOptions& g, const std::string& manifest, int workers,
              const std::map<std::string, std::string>& overrides) {
  const auto cfg = load_config(g.config, overrides);
  const auto entries = read_manifest(manifest);
  const fs::path out = g.out.value_or("out");
  const auto results = run_batch(entries, cfg, out, workers);
  bool all_ok = true;
  json j = json::array();
  for (const auto& r : results) {
    all_ok = all_ok && r.ok;
    j.push_back({{"video_id", r.video_id}, {"ok", r.ok}, {"error", r.error}});
    if (!g.json) {
      if (r.ok) fmt::print("{}: ok\n", r.video_id);
      else fmt::print(stderr, "{}: FAILED: {}\n", r.video_id, r.error);
    }
  }
  if (g.json) std::cout << json{{"output_dir", out.string()}, {"videos", j}}.dump(2) << '\n';
  return all_ok ? 0 : 2;
}

int run_simulate(const GlobalOptions& g, const std::optional<std::string>& scene_path,
                 std::optional<std::string> video_id, bool frames) {
  std::map<std::string, std::string> values;
  if (scene_path) {
    std::ifstream in(*scene_path);
    if (!in) throw ConfigError({fmt::format("cannot open scene file '{}'", *scene_path)});
    values = parse_key_value_text(in);
  }
  if (g.seed) values["seed"] = std::to_string(*g.seed);
  const SceneConfig cfg = parse_scene_config(values);
  const std::string id = video_id.value_or(fmt::format("sim{}", cfg.seed));
  const fs::path out = g.out.value_or("sim");
  fs::create_directories(out);

  const GroundTruth truth = generate_scene(cfg);
  const auto dets = emit_detections(truth, cfg.noise);
  {
    std::ofstream f(out / (id + "_detections.jsonl"), std::ios::binary);
    write_detections_jsonl(f, dets, id);
  }
  write_truth_dataset(out, id, truth);
  {
    std::ofstream f(out / (id + "_scene.txt"), std::ios::binary);
    f << scene_config_to_text(cfg);
  }
  ManifestEntry entry;
  entry.video_id = id;
  entry.meta = scene_meta(cfg);
  entry.detections_path = id + "_detections.jsonl";
  if (frames) {
    entry.frames_path = id + "_frames.bin";
    PackedFrameWriter writer(out / *entry.frames_path, cfg.frame_width, cfg.frame_height,
                             static_cast<std::uint32_t>(cfg.frame_count));
    RasterFrameSource source(truth);
    while (auto img = source.next()) writer.write(*img);
    writer.close();
  }
  {
    std::ofstream f(out / (id + "_manifest.txt"), std::ios::binary);
    f << manifest_line(entry) << '\n';
  }
  if (g.json) {
    std::cout << json{{"video_id", id},
                      {"output_dir", out.string()},
                      {"insects", truth.insects.size()},
                      {"flowers", truth.flowers.size()},
                      {"visits", truth.visits.size()},
                      {"detections", dets.size()}}
                     .dump(2)
              << '\n';
  } else {
    fmt::print("{}: {} insects, {} flowers, {} true visits, {} detections -> {}\n", id,
               truth.insects.size(), truth.flowers.size(), truth.visits.size(), dets.size(), out.string());
  }
  return 0;
}

int run_evaluate(const GlobalOptions& g, const std::string& pred_dir, const std::string& truth_dir,
                 const std::string& video, double flower_gate) {
  const auto cfg = load_config(g.config, {});
  const PredictedDataset pred = read_predicted(pred_dir, video);
  const TruthDataset truth = read_truth(truth_dir, video);
  const TrackEvaluation te = evaluate_tracks(pred.tracks, truth.tracks, cfg->min_track_frames, truth.frame_count);
  const auto rows = summarize_by_species(te, pred.tracks);
  const auto flower_map = match_flowers(pred.final_flowers, truth.final_flowers, flower_gate);
  const VisitEvaluation ve = evaluate_visits(pred.visits, truth.visits, te.track_to_truth, flower_map);

  if (g.json) {
    json tracks = json::array();
    for (const auto& r : rows) {
      tracks.push_back({{"species", species_name(r.species)},
                        {"observed", r.observed},
                        {"visible_frames", r.visible_frames},
                        {"tracklets", r.tracklets},
                        {"tracked", r.insects_tracked},
                        {"missed", r.insects_missed},
                        {"false_tracks", r.false_tracks},
                        {"identity_swaps", r.identity_swaps},
                        {"tp", r.points.tp},
                        {"fn", r.points.fn},
                        {"fp", r.points.fp},
                        {"precision", opt(r.precision)},
                        {"recall", opt(r.recall)},
                        {"f_score", opt(r.f_score)}});
    }
    json visits = json::array();
    for (Species s : kInsectSpecies) {
      const auto it = ve.by_species.find(s);
      const EvaluationCounts c = it == ve.by_species.end() ? EvaluationCounts{} : it->second;
      const auto obs = ve.observed_by_species.find(s);
      visits.push_back({{"species", species_name(s)},
                        {"observed", obs == ve.observed_by_species.end() ? 0 : obs->second},
                        {"tp", c.tp},
                        {"fp", c.fp},
                        {"fn", c.fn}});
    }
    const auto& a = te.aggregate;
    std::cout << json{{"video_id", video},
                      {"tracks", tracks},
                      {"aggregate",
                       {{"tp", a.tp},
                        {"fn", a.fn},
                        {"fp", a.fp},
                        {"identity_swaps", a.identity_swaps},
                        {"false_positive_tracks", te.false_positive_tracks.size()},
                        {"precision", opt(a.precision())},
                        {"recall", opt(a.recall())},
                        {"f_score", opt(a.f_score())}}},
                      {"visits", visits},
                      {"visit_totals",
                       {{"tp", ve.counts.tp},
                        {"fp", ve.counts.fp},
                        {"fn", ve.counts.fn},
                        {"false_negative_reasons", ve.false_negative_reasons}}}}
                     .dump(2)
              << '\n';
    return 0;
  }

  fmt::print("Insect tracking ({})\n", video);
  fmt::print("{:<12} {:>5} {:>8} {:>9} {:>7} {:>6} {:>6} {:>4} {:>9} {:>7} {:>7}\n", "species", "obs",
             "visible", "tracklets", "TP", "FN", "FP", "IS", "precision", "recall", "F");
  for (const auto& r : rows) {
    fmt::print("{:<12} {:>5} {:>8} {:>9} {:>7} {:>6} {:>6} {:>4} {:>9} {:>7} {:>7}\n", species_name(r.species),
               r.observed, r.visible_frames, r.tracklets, r.points.tp, r.points.fn, r.points.fp,
               r.identity_swaps, fmt_opt(r.precision), fmt_opt(r.recall), fmt_opt(r.f_score));
  }
  const auto& a = te.aggregate;
  fmt::print("{:<12} {:>5} {:>8} {:>9} {:>7} {:>6} {:>6} {:>4} {:>9} {:>7} {:>7}\n", "all", "", "", "", a.tp,
             a.fn, a.fp, a.identity_swaps, fmt_opt(a.precision()), fmt_opt(a.recall()), fmt_opt(a.f_score()));
  fmt::print("false-positive tracks: {}\n\n", te.false_positive_tracks.size());
  fmt::print("Flower visits\n{:<12} {:>8} {:>5} {:>5} {:>5}\n", "species", "observed", "TP", "FP", "FN");
  for (Species s : kInsectSpecies) {
    const auto it = ve.by_species.find(s);
    const EvaluationCounts c = it == ve.by_species.end() ? EvaluationCounts{} : it->second;
    const auto obs = ve.observed_by_species.find(s);
    fmt::print("{:<12} {:>8} {:>5} {:>5} {:>5}\n", species_name(s),
               obs == ve.observed_by_species.end() ? 0 : obs->second, c.tp, c.fp, c.fn);
  }
  std::map<std::string, int> reasons;
  for (const auto& r : ve.false_negative_reasons) ++reasons[r];
  for (const auto& [r, n] : reasons) fmt::print("  FN {}: {}\n", r, n);
  return 0;
}

int run_report(const GlobalOptions& g, const std::vector<std::string>& dirs) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const AggregateReport a = aggregate_locations(paths);
  const fs::path out = g.out.value_or("report");
  write_report(a, out);
  if (g.json) {
    json j = json::array();
    for (const auto& r : a.reports) j.push_back(json::parse(report_json(r)));
    std::cout << json{{"output_dir", out.string()}, {"locations", j}}.dump(2) << '\n';
  } else {
    std::cout << aggregate_csv(a);
  }
  return 0;
}

int run_bench(const GlobalOptions& g, const std::string& frames_path,
              const std::optional<std::string>& detections,
              const std::map<std::string, std::string>& overrides) {
  const auto cfg = load_config(g.config, overrides);
  auto source = open_frame_source(frames_path);
  std::vector<GrayImage> frames;
  while (auto img = source->next()) frames.push_back(std::move(*img));
  VectorFrameSource vs(std::move(frames));
  VideoMeta meta;
  meta.frame_width = vs.width();
  meta.frame_height = vs.height();
  std::optional<fs::path> det;
  if (detections) det = *detections;
  const BenchResult b = bench(vs, meta, cfg, det);
  if (g.json) {
    std::cout << json{{"frames", b.frames},
                      {"full_resolution_fps", b.full_fps()},
                      {"low_resolution_fps", b.lowres_fps()},
                      {"ratio", b.ratio()},
                      {"low_resolution_frames", b.lowres_frames}}
                     .dump(2)
              << '\n';
  } else {
    fmt::print("frames: {}\nfull-resolution only: {:.1f} fps\nwith low-res path: {:.1f} fps ({} frames low-res)\nratio: {:.2f}\n",
               b.frames, b.full_fps(), b.lowres_fps(), b.lowres_frames, b.ratio());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Insect tracking and pollination analytics"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_flag("--json", g.json, "machine-readable JSON on stdout");
  app.add_option("--config", g.config, "engine config file (key=value)");
  app.add_option("--seed", g.seed, "scene seed (simulate)");
  app.add_option("--out", g.out, "output directory");

  std::map<std::string, std::string> overrides;

  auto* track = app.add_subcommand("track", "track every video of a manifest")->fallthrough();
  std::string manifest;
  int workers = 1;
  track->add_option("manifest", manifest, "manifest file")->required()->check(CLI::ExistingFile);
  track->add_option("--workers", workers, "videos processed concurrently")->check(CLI::PositiveNumber);
  add_config_flags(track, overrides);

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scene with ground truth")->fallthrough();
  std::optional<std::string> scene;
  std::optional<std::string> video_id;
  bool write_frames = false;
  simulate->add_option("--scene", scene, "scene file (key=value)");
  simulate->add_option("--video-id", video_id, "video id (default sim<seed>)");
  simulate->add_flag("--frames", write_frames, "also render a packed frame stream");

  auto* evaluate = app.add_subcommand("evaluate", "compare engine output with ground truth")->fallthrough();
  std::string pred_dir, truth_dir, video;
  double flower_gate = 60.0;
  evaluate->add_option("--pred", pred_dir, "engine dataset directory")->required();
  evaluate->add_option("--truth", truth_dir, "ground-truth directory")->required();
  evaluate->add_option("--video", video, "video id")->required();
  evaluate->add_option("--flower-gate", flower_gate, "max px between matched flower centres");

  auto* report = app.add_subcommand("report", "aggregate datasets per location")->fallthrough();
  std::vector<std::string> dirs;
  report->add_option("datasets", dirs, "dataset directories")->required();

  auto* benchcmd = app.add_subcommand("bench", "low-res on/off throughput")->fallthrough();
  std::string bench_frames;
  std::optional<std::string> bench_dets;
  benchcmd->add_option("--frames", bench_frames, "PGM directory or packed stream")->required();
  benchcmd->add_option("--detections", bench_dets, "detection JSONL");
  add_config_flags(benchcmd, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*track) return run_track(g, manifest, workers, overrides);
    if (*simulate) return run_simulate(g, scene, video_id, write_frames);
    if (*evaluate) return run_evaluate(g, pred_dir, truth_dir, video, flower_gate);
    if (*report) return run_report(g, dirs);
    if (*benchcmd) return run_bench(g, bench_frames, bench_dets, overrides);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
