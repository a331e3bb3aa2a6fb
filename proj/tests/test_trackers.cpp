#include <doctest.h>

#include "pollitrack/flower_tracker.hpp"
#include "pollitrack/insect_tracker.hpp"

using namespace pollitrack;

namespace {

const ValidatedConfig kCfg = validate_config(EngineConfig{});

Detection insect(std::int64_t frame, double x, double y, Species s = Species::Honeybee) {
  return {frame, s, {x, y}, {20, 14}, 0.9, DetectionSource::DeepDetector};
}

Detection blob(std::int64_t frame, double x, double y) {
  return {frame, Species::Unknown, {x, y}, {20, 14}, 1.0, DetectionSource::Segmentation};
}

Detection flower(std::int64_t frame, double x, double y, double size = 80) {
  return {frame, Species::Flower, {x, y}, {size, size}, 0.95, DetectionSource::DeepDetector};
}

DetectionBatch batch(std::int64_t frame, std::vector<Detection> dets) {
  return {frame, std::move(dets), ProcessingMode::Full, 0};
}

}  // namespace

TEST_CASE("a steady insect yields one track") {
  InsectTracker t(kCfg, VideoMeta{});
  for (int f = 0; f < 20; ++f) t.step(batch(f, {insect(f, 100 + 5 * f, 200)}));
  REQUIRE(t.tracks().size() == 1);
  CHECK(t.tracks()[0].points.size() == 20);
  CHECK(path_length(t.tracks()[0]) == doctest::Approx(95.0));
  CHECK(predict_position(t.tracks()[0]) == Point{200, 200});
  CHECK(predict_position(t.tracks()[0], 22) == Point{210, 200});
}

TEST_CASE("a lost track coasts and closes after the timeout") {
  InsectTracker t(kCfg, VideoMeta{});
  for (int f = 0; f < 10; ++f) t.step(batch(f, {insect(f, 100, 100)}));
  for (int f = 10; f < 24; ++f) {
    CHECK(t.step(batch(f, {})).empty());
    CHECK(t.tracks()[0].status == TrackStatus::Coasting);
  }
  auto events = t.step(batch(24, {}));
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == TrackEventKind::Closed);
  CHECK(t.tracks()[0].status == TrackStatus::Closed);
  CHECK(t.live_track_count() == 0);
}

TEST_CASE("re-acquisition fills the gap with interpolated points") {
  InsectTracker t(kCfg, VideoMeta{});
  for (int f = 0; f < 10; ++f) t.step(batch(f, {insect(f, 100 + 2 * f, 100)}));
  for (int f = 10; f < 13; ++f) t.step(batch(f, {}));
  t.step(batch(13, {insect(13, 126, 100)}));
  const auto& pts = t.tracks()[0].points;
  REQUIRE(pts.size() == 14);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i].frame_index == static_cast<std::int64_t>(i));
  CHECK(pts[11].source == PointSource::Interpolated);
  CHECK(pts[11].position.x == doctest::Approx(122.0));
  CHECK(pts[13].source == PointSource::DeepDetector);
}

TEST_CASE("an insect returning after the timeout is a new track with a new code") {
  VideoMeta meta;
  meta.camera_number = 3;
  InsectTracker t(kCfg, meta);
  std::int64_t f = 0;
  for (; f < 10; ++f) t.step(batch(f, {insect(f, 1900, 500)}));
  for (; f < 45; ++f) t.step(batch(f, {}));
  for (; f < 55; ++f) t.step(batch(f, {insect(f, 1900, 500)}));
  REQUIRE(t.tracks().size() == 2);
  CHECK(t.tracks()[0].track_code != t.tracks()[1].track_code);
  CHECK(t.tracks()[0].status == TrackStatus::Closed);
}

TEST_CASE("flower-only streams create no insect tracks") {
  InsectTracker t(kCfg, VideoMeta{});
  for (int f = 0; f < 5; ++f) t.step(batch(f, {flower(f, 300, 300)}));
  CHECK(t.tracks().empty());
}

TEST_CASE("segmentation extends tracks but never opens one") {
  InsectTracker t(kCfg, VideoMeta{});
  t.step(batch(0, {blob(0, 50, 50)}));
  CHECK(t.tracks().empty());
  t.step(batch(1, {insect(1, 50, 50, Species::Vespidae)}));
  t.step(batch(2, {blob(2, 53, 50)}));
  REQUIRE(t.tracks().size() == 1);
  CHECK(t.tracks()[0].points.back().source == PointSource::Segmentation);
  CHECK(t.tracks()[0].species == Species::Vespidae);
}

TEST_CASE("detections beyond the gate open new tracks") {
  InsectTracker t(kCfg, VideoMeta{});
  t.step(batch(0, {insect(0, 100, 100)}));
  t.step(batch(1, {insect(1, 400, 100)}));
  CHECK(t.tracks().size() == 2);
}

TEST_CASE("two parallel insects keep their identities") {
  InsectTracker t(kCfg, VideoMeta{});
  for (int f = 0; f < 40; ++f) {
    t.step(batch(f, {insect(f, 100 + 6 * f, 300), insect(f, 100 + 6 * f, 340, Species::Syrphidae)}));
  }
  REQUIRE(t.tracks().size() == 2);
  for (const auto& tr : t.tracks()) {
    const double y = tr.points.front().position.y;
    for (const auto& p : tr.points) CHECK(p.position.y == y);
  }
}

TEST_CASE("frames must increase") {
  InsectTracker t(kCfg, VideoMeta{});
  t.step(batch(5, {}));
  CHECK_THROWS_AS(t.step(batch(5, {})), StreamError);
}

TEST_CASE("false-positive culling") {
  InsectTrack short_track{.id = 0,
                          .track_code = make_track_code(VideoMeta{}, 0, Species::Honeybee),
                          .species = Species::Honeybee,
                          .points = {{0, {10, 10}, PointSource::DeepDetector}, {1, {13, 10}, PointSource::DeepDetector}},
                          .status = TrackStatus::Closed,
                          .missed_frames = 0,
                          .visits = {},
                          .first_extent = {}};
  CHECK(finalize_track(short_track, kCfg.get()) == TrackVerdict::CulledFalsePositive);
  short_track.visits.push_back(0);
  CHECK(finalize_track(short_track, kCfg.get()) == TrackVerdict::Accepted);
  short_track.visits.clear();
  short_track.points.push_back({2, {23, 10}, PointSource::DeepDetector});
  CHECK(finalize_track(short_track, kCfg.get()) == TrackVerdict::Accepted);
  short_track.status = TrackStatus::Active;
  CHECK_THROWS(finalize_track(short_track, kCfg.get()));
}

TEST_CASE("processing mode") {
  CHECK(select_processing_mode(0, false) == ProcessingMode::LowRes);
  CHECK(select_processing_mode(0, true) == ProcessingMode::Full);
  CHECK(select_processing_mode(2, false) == ProcessingMode::Full);
}

TEST_CASE("flowers register, update and carry forward") {
  FlowerTracker ft(kCfg);
  CHECK(ft.is_epoch(0));
  CHECK(ft.is_epoch(3000));
  CHECK_FALSE(ft.is_epoch(1500));
  auto ev = ft.update({flower(0, 300, 300), flower(0, 600, 300, 100)}, 0);
  REQUIRE(ft.flowers().size() == 2);
  CHECK(ft.flowers()[0].flower_id == "F0");
  CHECK(ft.flowers()[1].flower_id == "F1");
  CHECK(ft.flowers()[0].radius == doctest::Approx(48.0));
  CHECK(ev[0].kind == FlowerEventKind::Registered);

  ev = ft.update({flower(3000, 310, 305), flower(3000, 1200, 700)}, 3000);
  REQUIRE(ft.flowers().size() == 3);
  CHECK(ft.flowers()[0].center == Point{310, 305});
  CHECK(ev[0].kind == FlowerEventKind::Updated);
  CHECK(ft.flowers()[1].center == Point{600, 300});
  CHECK(ft.flowers()[1].radius == doctest::Approx(60.0));
  CHECK(ev[1].kind == FlowerEventKind::CarriedForward);
  CHECK_FALSE(ft.flowers()[1].epoch_history.back().detected);
  CHECK(ft.flowers()[2].flower_id == "F2");

  CHECK_THROWS_AS(ft.update({}, 4000), std::logic_error);
  CHECK_THROWS_AS(ft.update({}, 3000), std::logic_error);
}

TEST_CASE("flower radius") {
  CHECK(flower_radius({80, 60}, 0.2) == doctest::Approx(48.0));
  CHECK(flower_radius({80, 60}, 0.0) == doctest::Approx(40.0));
  CHECK_THROWS(flower_radius({0, 60}, 0.2));
}
