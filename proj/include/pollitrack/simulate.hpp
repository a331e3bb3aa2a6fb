#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/flower_tracker.hpp"
#include "pollitrack/image.hpp"
#include "pollitrack/metrics.hpp"
#include "pollitrack/visits.hpp"

namespace pollitrack {

struct MotionModel {
  double speed_min_px = 2.0;  // per frame, drawn once per insect
  double speed_max_px = 6.0;
  double turn_sigma_rad = 0.35;
  double attraction_probability = 0.02;  // per wandering frame
  int dwell_min_frames = 10;
  int dwell_max_frames = 60;
  double dwell_wiggle_px = 0.5;
  int cooldown_frames = 30;  // wandering frames after a dwell before the next approach
  std::int64_t max_lifetime_frames = 1500;  // then the insect heads for the nearest edge
};

struct NoiseModel {
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;  // expected spurious insect detections per frame
  double jitter_sigma_px = 0.0;
  double flower_miss_rate = 0.0;
};

struct SceneConfig {
  std::uint64_t seed = 1;
  std::int64_t frame_count = 3000;
  int frame_width = 1920;
  int frame_height = 1080;
  double fps = 30.0;
  int camera_number = 1;
  std::chrono::year_month_day record_date{std::chrono::year{2021}, std::chrono::March,
                                          std::chrono::day{1}};
  std::chrono::seconds record_start_time{9 * 3600};

  int flower_count = 5;
  double flower_size_min_px = 60.0;
  double flower_size_max_px = 100.0;
  double flower_border_px = 120.0;  // centres keep this far from the frame edge
  double flower_min_gap_px = 20.0;  // between visit radii
  int flower_update_interval_frames = 3000;
  double flower_drift_px = 0.0;  // sigma of the move at each update epoch

  std::map<Species, int> insect_counts{{Species::Honeybee, 2}};
  std::map<Species, Extent> body_sizes;  // defaults per species when absent
  double min_separation_px = 0.0;        // 0 disables
  std::int64_t quiet_frames = 0;         // no entry this soon after another insect's exit

  MotionModel motion;
  NoiseModel noise;

  // Visit rule applied to the true geometry.
  int visit_dwell_frames = 5;
  double flower_radius_margin_fraction = 0.2;
};

Extent default_body_size(Species s);

/// Throws ConfigError listing every invalid field.
void validate_scene(const SceneConfig& cfg);

/// key=value scene description; unknown keys and bad values throw ConfigError.
SceneConfig parse_scene_config(const std::map<std::string, std::string>& values);
std::string scene_config_to_text(const SceneConfig& cfg);

VideoMeta scene_meta(const SceneConfig& cfg);

struct TrueFlower {
  std::string flower_id;
  Extent extent;
  double radius = 0.0;               // visit radius
  std::vector<FlowerEpoch> epochs;   // position at every update epoch
};

struct TruePosition {
  std::int64_t frame_index = 0;
  Point center;
};

struct TrueInsect {
  int true_id = 0;
  Species species = Species::Honeybee;
  Extent extent;
  std::vector<TruePosition> positions;  // consecutive frames while the centre is in frame
};

struct GroundTruth {
  SceneConfig config;
  std::vector<TrueFlower> flowers;
  std::vector<TrueInsect> insects;
  std::vector<VisitEvent> visits;  // track_id holds the true id
};

/// Deterministic in cfg (including the seed). Each insect draws from its own
/// child stream. Throws GenerationError when flowers cannot be placed or
/// separation constraints cannot be met.
GroundTruth generate_scene(const SceneConfig& cfg);

/// Flowers as FlowerRecords positioned at the epoch in force at frame_index.
std::vector<FlowerRecord> flowers_at(const GroundTruth& truth, std::int64_t frame_index);

/// Replays the dwell rule over the true geometry.
std::vector<VisitEvent> replay_visits(const GroundTruth& truth);

TrackCode true_track_code(const GroundTruth& truth, const TrueInsect& insect);

struct EmittedDetection {
  Detection detection;
  std::optional<int> true_track_id;  // absent for flowers and false positives
};

/// Noisy detector output, sorted by frame: flowers at update epochs, then
/// true insects, then false positives. Every true position draws its miss
/// and jitter variates whether or not it is dropped, so scenes differing only
/// in miss rate drop nested subsets of positions.
std::vector<EmittedDetection> emit_detections(const GroundTruth& truth, const NoiseModel& noise);

void write_detections_jsonl(std::ostream& out, const std::vector<EmittedDetection>& dets,
                            const std::string& video_id);

struct RasterStyle {
  std::uint8_t background = 110;
  std::uint8_t flower = 200;
  std::uint8_t insect = 30;
  std::optional<std::int64_t> illumination_step_frame;  // from this frame on...
  int illumination_step = 0;                              // ...add this to every pixel
};

/// Renders frames on demand: background, flower discs of radius max(w, h) / 2,
/// insect rectangles of their body extent.
class RasterFrameSource final : public FrameSource {
 public:
  RasterFrameSource(const GroundTruth& truth, RasterStyle style = {});

  int width() const override { return truth_.config.frame_width; }
  int height() const override { return truth_.config.frame_height; }
  std::int64_t frame_count() const override { return truth_.config.frame_count; }
  std::optional<GrayImage> next() override;

  GrayImage render(std::int64_t frame_index) const;

 private:
  const GroundTruth& truth_;
  RasterStyle style_;
  std::int64_t next_ = 0;
};

/// Visible body regions per true insect, for evaluate_tracks.
std::vector<TruthTrack> truth_tracks(const GroundTruth& truth);

}  // namespace pollitrack
