#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "pollitrack/assignment.hpp"
#include "pollitrack/core_model.hpp"
#include "pollitrack/detect.hpp"
#include "pollitrack/metrics.hpp"
#include "pollitrack/pipeline.hpp"
#include "pollitrack/simulate.hpp"
#include "pollitrack/visits.hpp"

using namespace pollitrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool near2(double value, double published) { return std::abs(value - published) <= 0.005; }

// ---------------------------------------------------------------------------

struct Row {
  const char* name;
  std::int64_t tp, fp, fn;
  double p, r, f;
};

Outcome check_rows(const std::vector<Row>& rows) {
  std::string bad;
  for (const auto& row : rows) {
    const auto p = precision(row.tp, row.fp);
    const auto r = recall(row.tp, row.fn);
    const auto f = f_score(p, r);
    if (!p || !r || !f || !near2(*p, row.p) || !near2(*r, row.r) || !near2(*f, row.f)) {
      bad += fmt::format(" {}: got {:.4f}/{:.4f}/{:.4f}", row.name, p.value_or(-1), r.value_or(-1), f.value_or(-1));
    }
  }
  if (!bad.empty()) return {false, "mismatch" + bad};
  return {true, fmt::format("{} rows within 0.005", rows.size())};
}

Outcome metric_fixtures() {
  return check_rows({
      {"T1 Syrphidae", 336, 0, 66, 1.00, 0.84, 0.91},
      {"T1 Syrphidae b", 37, 0, 10, 1.00, 0.79, 0.88},
      {"T2 Honeybee", 1347, 3, 2, 1.00, 1.00, 1.00},
      {"T3 Vespidae", 5, 0, 5, 1.00, 0.50, 0.67},
      {"T3 Honeybee", 5243, 7, 305, 1.00, 0.95, 0.97},
      {"T4 Honeybee", 212, 0, 12, 1.00, 0.95, 0.97},
      {"T6 Vespidae", 114, 1, 3, 0.99, 0.97, 0.98},
      {"T8 Vespidae", 2, 0, 4, 1.00, 0.33, 0.50},
      {"T8 Lepidoptera", 163, 4, 4, 0.98, 0.98, 0.98},
      {"T10 Syrphidae", 176, 2, 93, 0.99, 0.65, 0.79},
  });
}

Outcome detector_fixture() { return check_rows({{"detector", 2755, 312, 491, 0.90, 0.85, 0.87}}); }

// ---------------------------------------------------------------------------

double brute_min_cost(const CostMatrix& c) {
  const bool transpose = c.rows() > c.cols();
  const int n = transpose ? c.cols() : c.rows();
  const int m = transpose ? c.rows() : c.cols();
  auto at = [&](int i, int j) { return transpose ? c(j, i) : c(i, j); };
  std::vector<int> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = INFINITY;
  // every injection of n rows into m columns appears as the prefix of some permutation
  do {
    double s = 0;
    for (int i = 0; i < n; ++i) s += at(i, cols[static_cast<std::size_t>(i)]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

Outcome assignment_optimality() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> cost(0, 999);
  int checked = 0;
  for (int r = 2; r <= 6; ++r) {
    for (int c = 2; c <= 6; ++c) {
      for (int k = 0; k < 1000; ++k) {
        CostMatrix m(r, c);
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < c; ++j) m(i, j) = cost(rng);
        }
        const auto a = solve_assignment(m);
        const double want = brute_min_cost(m);
        if (a.total_cost != want || static_cast<int>(a.pairs.size()) != std::min(r, c)) {
          return {false, fmt::format("{}x{} matrix #{}: {} vs exhaustive {}", r, c, k, a.total_cost, want)};
        }
        ++checked;
      }
    }
  }
  return {true, fmt::format("{} matrices, 2x2..6x6, exact", checked)};
}

// ---------------------------------------------------------------------------

struct EngineRun {
  GroundTruth truth;
  VideoResult result;
  std::vector<PredictedTrack> predicted;
  TrackEvaluation eval;
};

EngineRun run_engine(const SceneConfig& sc) {
  EngineRun out;
  out.truth = generate_scene(sc);
  std::ostringstream jsonl;
  write_detections_jsonl(jsonl, emit_detections(out.truth, sc.noise), "acc");
  std::istringstream in(jsonl.str());
  const auto meta = scene_meta(sc);
  DeepDetectionReader reader(in, meta.frame_width, meta.frame_height, "acc");
  const auto cfg = validate_config(EngineConfig{});
  out.result = run_video_streams("acc", meta, cfg, nullptr, &reader);
  for (std::size_t i = 0; i < out.result.tracks.size(); ++i) {
    if (!out.result.accepted(i)) continue;
    const auto& t = out.result.tracks[i];
    PredictedTrack p{t.id, out.result.track_keys[i], t.species, {}};
    for (const auto& pt : t.points) p.points.push_back({pt.frame_index, pt.position});
    out.predicted.push_back(std::move(p));
  }
  out.eval = evaluate_tracks(out.predicted, truth_tracks(out.truth), cfg->min_track_frames, sc.frame_count);
  return out;
}

SceneConfig oracle_scene(int i) {
  SceneConfig c;
  c.seed = 1000 + static_cast<std::uint64_t>(i);
  c.frame_count = 3000 + (i * 797) % 15001;
  c.flower_count = 3 + i % 7;
  c.camera_number = 1 + i % 9;
  const int insects = 1 + i % 5;
  c.insect_counts.clear();
  for (int k = 0; k < insects; ++k) ++c.insect_counts[kInsectSpecies[static_cast<std::size_t>((i + k) % 4)]];
  c.min_separation_px = 150;
  c.quiet_frames = 40;
  c.motion.attraction_probability = 0.03;
  return c;
}

Outcome noiseless_oracle() {
  std::size_t insects = 0, visits = 0, frames = 0;
  for (int i = 0; i < 20; ++i) {
    const auto sc = oracle_scene(i);
    const auto run = run_engine(sc);
    const auto fail = [&](const std::string& why) {
      return Outcome{false, fmt::format("scene {} (seed {}): {}", i, sc.seed, why)};
    };
    for (const auto& ins : run.eval.insects) {
      if (ins.ignored) continue;
      const auto f = ins.counts.f_score();
      if (!f || *f != 1.0) return fail(fmt::format("insect {} F={}", ins.true_id, f.value_or(-1)));
    }
    if (run.eval.aggregate.identity_swaps != 0) return fail("identity swaps");
    if (!run.eval.false_positive_tracks.empty()) return fail("false-positive tracks");

    struct Key {
      int insect;
      std::string flower;
      std::int64_t entry, exit;
      VisitKind kind;
      auto operator<=>(const Key&) const = default;
    };
    std::vector<Key> got, want;
    for (const auto& v : run.result.visits) {
      const auto it = run.eval.track_to_truth.find(v.track_id);
      got.push_back({it == run.eval.track_to_truth.end() ? -1 : it->second, v.flower_id, v.entry_frame,
                     v.exit_frame, v.kind});
    }
    for (const auto& v : run.truth.visits) want.push_back({v.track_id, v.flower_id, v.entry_frame, v.exit_frame, v.kind});
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got != want) return fail(fmt::format("visit logs differ ({} vs {} visits)", got.size(), want.size()));
    insects += run.truth.insects.size();
    visits += want.size();
    frames += static_cast<std::size_t>(sc.frame_count);
  }
  return {true, fmt::format("20 scenes ({} frames, {} insects, {} visits): F=1.0, 0 swaps, 0 false tracks, "
                            "identical visit logs", frames, insects, visits)};
}

// ---------------------------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome noisy_degradation() {
  const std::vector<double> miss_rates{0.1, 0.2, 0.3};
  std::vector<double> med_recall, med_precision;
  for (double miss : miss_rates) {
    std::vector<double> rs, ps;
    for (int s = 0; s < 10; ++s) {
      SceneConfig c;
      c.seed = 500 + static_cast<std::uint64_t>(s);
      c.insect_counts = {{Species::Honeybee, 2}, {Species::Syrphidae, 1}};
      c.min_separation_px = 150;
      c.quiet_frames = 40;
      c.noise.miss_rate = miss;
      c.noise.jitter_sigma_px = 2.0;
      const auto run = run_engine(c);
      rs.push_back(run.eval.aggregate.recall().value_or(0.0));
      ps.push_back(run.eval.aggregate.precision().value_or(0.0));
    }
    med_recall.push_back(median(rs));
    med_precision.push_back(median(ps));
  }
  const bool monotone = std::is_sorted(med_recall.rbegin(), med_recall.rend());
  const bool pass = med_recall[0] >= 0.9 && med_precision[0] >= 0.95 && monotone;
  return {pass, fmt::format("median recall {:.3f}/{:.3f}/{:.3f} at miss 0.1/0.2/0.3, precision {:.3f} at 0.1",
                            med_recall[0], med_recall[1], med_recall[2], med_precision[0])};
}

// ---------------------------------------------------------------------------

Outcome dwell_semantics() {
  const std::vector<FlowerRecord> flowers{{"F0", {100, 100}, 40, {}}, {"F1", {400, 100}, 40, {}}};
  const Point off{250, 400};
  auto run = [&](std::vector<std::pair<Point, int>> runs) {
    VisitDetector d(5);
    std::int64_t f = 0;
    for (const auto& [p, n] : runs) {
      for (int k = 0; k < n; ++k) d.update(0, "code", Species::Honeybee, p, f++, flowers);
    }
    d.close_track(0);
    return d.visits();
  };
  const auto five = run({{off, 2}, {flowers[0].center, 5}, {off, 2}});
  const auto six = run({{off, 2}, {flowers[0].center, 6}, {off, 2}});
  const auto seq = run({{flowers[0].center, 6}, {off, 1}, {flowers[1].center, 6}, {off, 1}, {flowers[0].center, 6}});
  const auto revisits = std::count_if(seq.begin(), seq.end(), [](const VisitEvent& v) { return v.kind == VisitKind::ReVisit; });
  const bool pass = five.empty() && six.size() == 1 && seq.size() == 3 && revisits == 1 &&
                    seq[2].kind == VisitKind::ReVisit && seq[2].flower_id == "F0";
  return {pass, fmt::format("5 frames -> {} visits, 6 frames -> {}, A-B-A -> {} visits with {} re-visit",
                            five.size(), six.size(), seq.size(), revisits)};
}

// ---------------------------------------------------------------------------

Outcome metric_equivalence() {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int nf = std::uniform_int_distribution<int>(1, 8)(rng);
    const int nj = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<std::vector<std::vector<int>>> n(static_cast<std::size_t>(nf),
        std::vector<std::vector<int>>(4, std::vector<int>(static_cast<std::size_t>(nj), 0)));
    VisitLog log;
    for (int f = 0; f < nf; ++f) log.add_flower("F" + std::to_string(f));
    for (int s = 0; s < 4; ++s) {
      for (int j = 0; j < nj; ++j) log.add_insect(kInsectSpecies[static_cast<std::size_t>(s)], "i" + std::to_string(j));
    }
    for (int f = 0; f < nf; ++f) {
      for (int s = 0; s < 4; ++s) {
        for (int j = 0; j < nj; ++j) {
          const int c = std::uniform_int_distribution<int>(0, 3)(rng);
          n[f][s][j] = c;
          if (c) log.add_visit("F" + std::to_string(f), kInsectSpecies[static_cast<std::size_t>(s)], "i" + std::to_string(j), c);
        }
      }
    }
    const int thr = trial % 2 ? 4 : std::uniform_int_distribution<int>(1, 6)(rng);
    int literal = 0, combined = 0;
    for (int s = 0; s < 4; ++s) {
      const Species sp = kInsectSpecies[static_cast<std::size_t>(s)];
      int fv_want = 0, npol = 0;
      for (int f = 0; f < nf; ++f) {
        const int vf_want = std::accumulate(n[f][s].begin(), n[f][s].end(), 0);
        fv_want += vf_want;
        npol += vf_want >= thr;
        if (vf(log, "F" + std::to_string(f), sp) != vf_want) return {false, fmt::format("log {}: per-flower species visits mismatch", trial)};
      }
      if (fv(log, sp) != fv_want) return {false, fmt::format("log {}: species visit total mismatch", trial)};
      if (n_pol_species(log, sp, thr) != npol) return {false, fmt::format("log {}: per-species fertilised count mismatch", trial)};
      literal += npol;
    }
    for (int f = 0; f < nf; ++f) {
      int all = 0;
      for (int s = 0; s < 4; ++s) all += std::accumulate(n[f][s].begin(), n[f][s].end(), 0);
      if (v(log, "F" + std::to_string(f)) != all) return {false, fmt::format("log {}: per-flower visits mismatch", trial)};
      combined += all >= thr;
    }
    if (n_pol(log, thr) != literal || n_pol_combined(log, thr) != combined) {
      return {false, fmt::format("log {}: location fertilised count mismatch", trial)};
    }
  }
  VisitLog boundary;
  boundary.add_visit("F0", Species::Honeybee, "a", 4);
  VisitLog split;
  split.add_visit("F0", Species::Honeybee, "a", 2);
  split.add_visit("F0", Species::Syrphidae, "b", 2);
  const bool edge = n_pol_species(boundary, Species::Honeybee, 4) == 1 && n_pol(split, 4) == 0 &&
                    n_pol_combined(split, 4) == 1;
  return {edge, fmt::format("100 random logs exact; VF=4 fertilised {}, 2+2 split literal {} combined {}",
                            n_pol_species(boundary, Species::Honeybee, 4), n_pol(split, 4), n_pol_combined(split, 4))};
}

// ---------------------------------------------------------------------------

Outcome lowres_throughput() {
  SceneConfig c;
  c.seed = 8;
  c.frame_width = 480;
  c.frame_height = 270;
  c.frame_count = 900;
  c.flower_count = 2;
  c.flower_size_min_px = 30;
  c.flower_size_max_px = 40;
  c.flower_border_px = 40;
  c.insect_counts = {{Species::Honeybee, 1}};
  c.motion.speed_min_px = 6;
  c.motion.speed_max_px = 8;
  c.motion.attraction_probability = 0.0;
  GroundTruth truth = generate_scene(c);
  // pick a seed whose single insect leaves at least 90% of frames empty
  auto empty_share = [](const GroundTruth& t) {
    std::size_t busy = 0;
    for (const auto& i : t.insects) busy += i.positions.size();
    return 1.0 - static_cast<double>(busy) / static_cast<double>(t.config.frame_count);
  };
  while (empty_share(truth) < 0.9 || truth.insects[0].positions.size() < 20) {
    ++c.seed;
    truth = generate_scene(c);
  }
  RasterFrameSource raster(truth);
  std::vector<GrayImage> frames;
  while (auto img = raster.next()) frames.push_back(std::move(*img));
  VectorFrameSource source(std::move(frames));

  const auto dir = fs::temp_directory_path() / "pollitrack_acceptance";
  fs::create_directories(dir);
  const auto det_path = dir / "bench_detections.jsonl";
  {
    std::ofstream f(det_path, std::ios::binary);
    write_detections_jsonl(f, emit_detections(truth, NoiseModel{}), "bench");
  }
  VideoMeta meta = scene_meta(c);
  const auto b = bench(source, meta, validate_config(EngineConfig{}), det_path);
  return {b.ratio() >= 1.5,
          fmt::format("{:.0f}% empty frames, full {:.1f} fps, low-res {:.1f} fps, ratio {:.2f}",
                      100 * empty_share(truth), b.full_fps(), b.lowres_fps(), b.ratio())};
}

// ---------------------------------------------------------------------------

Outcome segmentation_detector() {
  SceneConfig c;
  c.seed = 90;
  c.frame_width = 640;
  c.frame_height = 360;
  c.flower_count = 3;
  c.flower_border_px = 80;
  c.frame_count = 1500;
  c.insect_counts = {{Species::Honeybee, 6}, {Species::Syrphidae, 3}, {Species::Vespidae, 3}};
  c.min_separation_px = 60;
  c.motion.attraction_probability = 0.0;
  c.motion.speed_min_px = 4;
  c.motion.speed_max_px = 8;
  const auto truth = generate_scene(c);

  const BackgroundParams params = background_params(EngineConfig{});
  const int warmup = params.history_length;
  BackgroundModel model(params);
  RasterFrameSource raster(truth);
  std::int64_t visible = 0, found = 0;
  for (std::int64_t f = 0; f < c.frame_count; ++f) {
    const auto mask = model.update(*raster.next(), f);
    if (f < warmup) continue;
    const auto blobs = extract_blobs(mask, 20);
    for (const auto& ins : truth.insects) {
      const auto k = f - ins.positions.front().frame_index;
      if (k < 0 || k >= static_cast<std::int64_t>(ins.positions.size())) continue;
      const Point p = ins.positions[static_cast<std::size_t>(k)].center;
      if (p.x - ins.extent.w / 2 < 0 || p.y - ins.extent.h / 2 < 0 || p.x + ins.extent.w / 2 > c.frame_width ||
          p.y + ins.extent.h / 2 > c.frame_height) {
        continue;
      }
      ++visible;
      found += std::any_of(blobs.begin(), blobs.end(), [&](const Detection& b) { return distance(b.center, p) <= 2.0; });
    }
  }
  const double blob_recall = visible ? static_cast<double>(found) / static_cast<double>(visible) : 0.0;

  auto empty = c;
  empty.insect_counts.clear();
  const auto still = generate_scene(empty);
  RasterStyle style;
  style.illumination_step_frame = 100;
  style.illumination_step = 30;
  RasterFrameSource lit(still, style);
  BackgroundModel m2(params);
  std::int64_t settled = -1;
  for (std::int64_t f = 0; f < 100 + 2 * params.history_length; ++f) {
    const auto mask = m2.update(*lit.next(), f);
    if (f >= 100 && mask.count() == 0) {
      settled = f - 100;
      break;
    }
  }
  const bool absorbed = settled >= 0 && settled <= params.history_length;
  return {visible > 500 && blob_recall >= 0.95 && absorbed,
          fmt::format("blob recall {:.3f} over {} bodies within 2 px; step absorbed after {} frames (history {})",
                      blob_recall, visible, settled, params.history_length)};
}

// ---------------------------------------------------------------------------

Outcome track_codes() {
  using namespace std::chrono;
  auto meta = [](int cam, unsigned d, int h, int m, int s) {
    VideoMeta v;
    v.camera_number = cam;
    v.record_date = year{2021} / March / day{d};
    v.record_start_time = hours{h} + minutes{m} + seconds{s};
    return v;
  };
  const auto a = make_track_code(meta(4, 9, 13, 31, 55), 0, Species::Syrphidae).str();
  const auto b = make_track_code(meta(7, 10, 14, 27, 57), 0, Species::Vespidae).str();
  if (a != "40913315501" || b != "71014275703") return {false, fmt::format("fixtures gave {} and {}", a, b)};

  std::mt19937_64 rng(10);
  for (int k = 0; k < 1000; ++k) {
    const int cam = std::uniform_int_distribution<int>(1, 9)(rng);
    const unsigned d = std::uniform_int_distribution<unsigned>(1, 28)(rng);
    const int start = std::uniform_int_distribution<int>(0, 86399)(rng);
    const std::int64_t frame = std::uniform_int_distribution<std::int64_t>(0, 60000)(rng);
    const Species s = kInsectSpecies[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
    const VideoMeta m = meta(cam, d, 0, 0, start);
    const auto code = make_track_code(m, frame, s);
    const auto dec = decode_track_code(TrackCode::parse(code.str()));
    const std::int64_t abs = start + static_cast<std::int64_t>(static_cast<double>(frame) / m.fps);
    const unsigned want_day = d + static_cast<unsigned>(abs / 86400);
    if (TrackCode::parse(code.str()) != code || dec.camera_number != cam || dec.species != s ||
        dec.day_of_month != want_day || dec.time_of_day != seconds{abs % 86400}) {
      return {false, fmt::format("round trip failed for {}", code.str())};
    }
  }
  return {true, "fixtures reproduced; 1000 random round trips"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "metric fixtures", 1, metric_fixtures},
      {2, "detector evaluation fixture", 1, detector_fixture},
      {3, "assignment optimality", 30, assignment_optimality},
      {4, "noiseless oracle equivalence", 120, noiseless_oracle},
      {5, "noisy degradation", 300, noisy_degradation},
      {6, "dwell semantics", 1, dwell_semantics},
      {7, "metric brute-force equivalence", 5, metric_equivalence},
      {8, "low-res fast path", 120, lowres_throughput},
      {9, "segmentation detector", 60, segmentation_detector},
      {10, "track-code fixtures", 1, track_codes},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    const bool in_time = took.count() < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    fmt::print("criterion {:>2} {:<32} {} ({:.2f} s, budget {:.0f} s) {}{}\n", c.id, c.name, pass ? "PASS" : "FAIL",
               took.count(), c.budget_s, o.detail, in_time ? "" : " [over budget]");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
