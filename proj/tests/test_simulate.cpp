#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pollitrack/detect.hpp"
#include "pollitrack/simulate.hpp"

using namespace pollitrack;

namespace {

SceneConfig small_scene(std::uint64_t seed) {
  SceneConfig c;
  c.seed = seed;
  c.frame_count = 1200;
  c.frame_width = 640;
  c.frame_height = 480;
  c.flower_count = 3;
  c.flower_border_px = 80;
  c.insect_counts = {{Species::Honeybee, 2}, {Species::Syrphidae, 1}};
  return c;
}

const TruePosition* position_at(const TrueInsect& ins, std::int64_t frame) {
  if (ins.positions.empty()) return nullptr;
  const auto k = frame - ins.positions.front().frame_index;
  if (k < 0 || k >= static_cast<std::int64_t>(ins.positions.size())) return nullptr;
  return &ins.positions[static_cast<std::size_t>(k)];
}

std::size_t total_positions(const GroundTruth& t) {
  std::size_t n = 0;
  for (const auto& i : t.insects) n += i.positions.size();
  return n;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate_scene(small_scene(5));
  auto b = generate_scene(small_scene(5));
  auto c = generate_scene(small_scene(6));
  REQUIRE(a.insects.size() == 3);
  bool differs = false;
  for (std::size_t i = 0; i < a.insects.size(); ++i) {
    REQUIRE(a.insects[i].positions.size() == b.insects[i].positions.size());
    for (std::size_t k = 0; k < a.insects[i].positions.size(); ++k) {
      CHECK(a.insects[i].positions[k].center == b.insects[i].positions[k].center);
    }
    differs |= a.insects[i].positions.size() != c.insects[i].positions.size() ||
               a.insects[i].positions.front().center != c.insects[i].positions.front().center;
  }
  CHECK(differs);
  CHECK(a.visits.size() == b.visits.size());
}

TEST_CASE("adding an insect leaves the others untouched") {
  auto cfg = small_scene(9);
  auto base = generate_scene(cfg);
  cfg.insect_counts[Species::Vespidae] = 2;
  auto more = generate_scene(cfg);
  REQUIRE(more.insects.size() == 5);
  for (std::size_t i = 0; i < base.insects.size(); ++i) {
    REQUIRE(base.insects[i].positions.size() == more.insects[i].positions.size());
    CHECK(base.insects[i].positions.back().center == more.insects[i].positions.back().center);
  }
}

TEST_CASE("zero speed keeps insects still") {
  auto cfg = small_scene(2);
  cfg.motion.speed_min_px = cfg.motion.speed_max_px = 0.0;
  auto t = generate_scene(cfg);
  for (const auto& ins : t.insects) {
    REQUIRE_FALSE(ins.positions.empty());
    for (const auto& p : ins.positions) CHECK(p.center == ins.positions.front().center);
    CHECK(ins.positions.back().frame_index == cfg.frame_count - 1);
  }
}

TEST_CASE("full attraction gives every long-lived insect a visit") {
  auto cfg = small_scene(4);
  cfg.frame_count = 2000;
  cfg.insect_counts = {{Species::Honeybee, 12}};
  cfg.motion.attraction_probability = 1.0;
  cfg.motion.speed_min_px = 20;
  cfg.motion.speed_max_px = 30;
  cfg.motion.dwell_min_frames = 6;
  auto t = generate_scene(cfg);
  int checked = 0;
  for (const auto& ins : t.insects) {
    // an insect heads for a flower on its first frame, so one that left the frame finished a dwell
    if (ins.positions.back().frame_index == cfg.frame_count - 1) continue;
    ++checked;
    const bool visited = std::any_of(t.visits.begin(), t.visits.end(),
                                     [&](const VisitEvent& v) { return v.track_id == ins.true_id; });
    CHECK(visited);
  }
  CHECK(checked >= 8);
}

TEST_CASE("truth visits are reproduced by replay and lie inside their flowers") {
  auto cfg = small_scene(12);
  cfg.motion.attraction_probability = 0.05;
  cfg.flower_drift_px = 5;
  cfg.flower_update_interval_frames = 300;
  auto t = generate_scene(cfg);
  auto replay = replay_visits(t);
  REQUIRE(replay.size() == t.visits.size());
  CHECK_FALSE(t.visits.empty());
  for (std::size_t k = 0; k < replay.size(); ++k) {
    CHECK(replay[k].entry_frame == t.visits[k].entry_frame);
    CHECK(replay[k].flower_id == t.visits[k].flower_id);
  }
  for (const auto& v : t.visits) {
    const auto& ins = t.insects[static_cast<std::size_t>(v.track_id - 1)];
    CHECK(v.dwell_frames() > cfg.visit_dwell_frames);
    for (auto f = v.entry_frame; f <= v.exit_frame; ++f) {
      const auto flowers = flowers_at(t, f);
      const auto it = std::find_if(flowers.begin(), flowers.end(),
                                   [&](const FlowerRecord& r) { return r.flower_id == v.flower_id; });
      REQUIRE(it != flowers.end());
      CHECK(distance(position_at(ins, f)->center, it->center) <= it->radius);
    }
  }
}

TEST_CASE("noiseless emission reproduces the truth") {
  auto t = generate_scene(small_scene(3));
  auto dets = emit_detections(t, NoiseModel{});
  std::size_t insects = 0, flowers = 0;
  std::int64_t last_frame = -1;
  for (const auto& e : dets) {
    CHECK(e.detection.frame_index >= last_frame);
    last_frame = e.detection.frame_index;
    if (e.detection.species == Species::Flower) {
      ++flowers;
      CHECK_FALSE(e.true_track_id);
      continue;
    }
    REQUIRE(e.true_track_id);
    ++insects;
    const auto& ins = t.insects[static_cast<std::size_t>(*e.true_track_id - 1)];
    const auto* p = position_at(ins, e.detection.frame_index);
    REQUIRE(p);
    CHECK(e.detection.center == p->center);
    CHECK(e.detection.species == ins.species);
  }
  CHECK(insects == total_positions(t));
  CHECK(flowers == t.flowers.size());  // one epoch in 1200 frames
}

TEST_CASE("miss rate drops a binomial share of positions") {
  auto cfg = small_scene(21);
  cfg.frame_count = 3000;
  cfg.insect_counts = {{Species::Honeybee, 30}};
  auto t = generate_scene(cfg);
  const auto n = static_cast<double>(total_positions(t));
  REQUIRE(n >= 10000);
  NoiseModel noise;
  noise.miss_rate = 0.3;
  double kept = 0;
  for (const auto& e : emit_detections(t, noise)) kept += e.true_track_id.has_value();
  CHECK(std::abs(kept - 0.7 * n) <= 3.0 * std::sqrt(n * 0.3 * 0.7));
}

TEST_CASE("misses nest across miss rates") {
  auto t = generate_scene(small_scene(8));
  NoiseModel lo, hi;
  lo.miss_rate = 0.1;
  hi.miss_rate = 0.4;
  std::set<std::pair<int, std::int64_t>> kept_lo;
  for (const auto& e : emit_detections(t, lo)) {
    if (e.true_track_id) kept_lo.insert({*e.true_track_id, e.detection.frame_index});
  }
  for (const auto& e : emit_detections(t, hi)) {
    if (e.true_track_id) CHECK(kept_lo.count({*e.true_track_id, e.detection.frame_index}) == 1);
  }
}

TEST_CASE("jitter error follows the Rayleigh mean") {
  auto cfg = small_scene(33);
  cfg.frame_count = 3000;
  cfg.insect_counts = {{Species::Honeybee, 6}};
  auto t = generate_scene(cfg);
  NoiseModel noise;
  noise.jitter_sigma_px = 1.0;
  double sum = 0;
  int n = 0;
  for (const auto& e : emit_detections(t, noise)) {
    if (!e.true_track_id) continue;
    const auto* p = position_at(t.insects[static_cast<std::size_t>(*e.true_track_id - 1)], e.detection.frame_index);
    sum += distance(e.detection.center, p->center);
    ++n;
  }
  REQUIRE(n > 1000);
  const double expected = std::sqrt(std::numbers::pi / 2.0);
  CHECK(std::abs(sum / n - expected) <= 0.1 * expected);
}

TEST_CASE("false positives arrive at the configured rate") {
  auto t = generate_scene(small_scene(14));
  NoiseModel noise;
  noise.false_positive_rate = 0.5;
  int fps = 0;
  for (const auto& e : emit_detections(t, noise)) {
    fps += !e.true_track_id && e.detection.species != Species::Flower;
  }
  const double n = 1200;
  CHECK(std::abs(fps - 0.5 * n) <= 4.0 * std::sqrt(n * 0.5));
}

TEST_CASE("detections serialise as JSONL") {
  auto t = generate_scene(small_scene(3));
  auto dets = emit_detections(t, NoiseModel{});
  std::ostringstream out;
  write_detections_jsonl(out, dets, "vid");
  std::istringstream in(out.str());
  DeepDetectionReader reader(in, 640, 480, "vid");
  std::size_t n = 0;
  for (std::int64_t f = 0; f < 1200; ++f) n += reader.detections_for(f).size();
  CHECK(n == dets.size());
}

TEST_CASE("empty scenes render identical frames") {
  auto cfg = small_scene(1);
  cfg.insect_counts.clear();
  cfg.frame_count = 5;
  auto t = generate_scene(cfg);
  RasterFrameSource src(t);
  auto first = *src.next();
  while (auto f = src.next()) CHECK(*f == first);
  CHECK(first.at(0, 0) == 110);
}

TEST_CASE("one insect renders as one dark rectangle at its position") {
  auto cfg = small_scene(17);
  cfg.insect_counts = {{Species::Honeybee, 1}};
  cfg.motion.speed_min_px = 1;
  cfg.motion.speed_max_px = 2;
  auto t = generate_scene(cfg);
  while (t.insects[0].positions.size() < 300) {
    ++cfg.seed;
    t = generate_scene(cfg);
  }
  RasterFrameSource src(t);
  const auto& ins = t.insects[0];
  int checked = 0;
  for (std::size_t k = 0; k < ins.positions.size(); k += 7) {
    const auto& p = ins.positions[k];
    if (p.center.x < 12 || p.center.y < 8 || p.center.x > 628 || p.center.y > 472) continue;
    auto img = src.render(p.frame_index);
    double sx = 0, sy = 0;
    int dark = 0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (img.at(x, y) != 30) continue;
        ++dark;
        sx += x + 0.5;
        sy += y + 0.5;
      }
    }
    CHECK(dark >= 20 * 14);
    CHECK(dark <= 21 * 15);
    CHECK(std::abs(sx / dark - p.center.x) <= 0.5);
    CHECK(std::abs(sy / dark - p.center.y) <= 0.5);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("illumination step shifts every pixel") {
  auto cfg = small_scene(1);
  cfg.insect_counts.clear();
  auto t = generate_scene(cfg);
  RasterStyle style;
  style.illumination_step_frame = 10;
  style.illumination_step = 30;
  RasterFrameSource src(t, style);
  CHECK(src.render(9).at(0, 0) == 110);
  CHECK(src.render(10).at(0, 0) == 140);
}

TEST_CASE("scene configuration text") {
  auto cfg = parse_scene_config({{"seed", "42"}, {"honeybee", "3"}, {"miss_rate", "0.2"}, {"frames", "500"}});
  CHECK(cfg.seed == 42);
  CHECK(cfg.insect_counts.at(Species::Honeybee) == 3);
  CHECK(cfg.noise.miss_rate == 0.2);
  std::istringstream in(scene_config_to_text(cfg));
  auto back = parse_scene_config(parse_key_value_text(in));
  CHECK(scene_config_to_text(back) == scene_config_to_text(cfg));
  CHECK_THROWS_AS(parse_scene_config({{"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(parse_scene_config({{"miss_rate", "1.5"}}), ConfigError);
}

TEST_CASE("infeasible scenes fail to generate") {
  auto cfg = small_scene(1);
  cfg.flower_count = 60;
  CHECK_THROWS_AS(generate_scene(cfg), GenerationError);
  auto crowded = small_scene(1);
  crowded.insect_counts = {{Species::Honeybee, 40}};
  crowded.min_separation_px = 300;
  crowded.quiet_frames = 1000;
  CHECK_THROWS_AS(generate_scene(crowded), GenerationError);
}

TEST_CASE("truth tracks carry bodies for evaluation") {
  auto t = generate_scene(small_scene(5));
  auto tracks = truth_tracks(t);
  REQUIRE(tracks.size() == t.insects.size());
  CHECK(tracks[0].bodies.size() == t.insects[0].positions.size());
  CHECK(tracks[0].bodies[0].extent == t.insects[0].extent);
  CHECK(decode_track_code(true_track_code(t, t.insects[0])).species == Species::Honeybee);
}
