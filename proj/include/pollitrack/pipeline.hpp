#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/detect.hpp"
#include "pollitrack/flower_tracker.hpp"
#include "pollitrack/image.hpp"
#include "pollitrack/insect_tracker.hpp"
#include "pollitrack/visits.hpp"

namespace pollitrack {

struct ManifestEntry {
  std::string video_id;
  VideoMeta meta;
  std::optional<std::filesystem::path> detections_path;
  std::optional<std::filesystem::path> frames_path;
};

/// One line per video: video_id, camera, date, start_time, detections_path[, frames_path].
/// Blank lines and '#' comments are skipped; relative paths resolve against base_dir.
/// Throws ParseError on malformed lines, duplicate ids or entries without inputs.
std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string manifest_line(const ManifestEntry& entry);

struct VideoStats {
  std::int64_t frames = 0;
  std::int64_t full_frames = 0;
  std::int64_t lowres_frames = 0;
  std::int64_t deep_frames = 0;
  std::int64_t segmentation_frames = 0;
};

/// One row of the per-track event log.
struct TrackLogEvent {
  int track_id = 0;
  std::int64_t frame_index = 0;
  std::string event;  // created | visit_start | visit_end | closed | culled
  Point position;
  std::string flower_id;
};

struct VideoResult {
  std::string video_id;
  VideoMeta meta;
  EngineConfig config;
  std::vector<InsectTrack> tracks;
  std::vector<TrackVerdict> verdicts;   // per track
  std::vector<std::string> track_keys;  // track code, suffixed "-2", "-3"... on collisions
  std::vector<VisitEvent> visits;
  std::vector<FlowerRecord> flowers;
  std::vector<std::vector<std::string>> point_flower_ids;  // per track point; empty off-flower
  std::vector<TrackLogEvent> events;
  VideoStats stats;

  bool accepted(std::size_t track) const { return verdicts[track] == TrackVerdict::Accepted; }
};

/// Runs the per-frame loop over whichever inputs are present. With frames, the
/// frame stream drives the loop; otherwise it runs until the detection stream
/// is exhausted. At least one source is required.
VideoResult run_video_streams(const std::string& video_id, const VideoMeta& meta,
                              const ValidatedConfig& cfg, FrameSource* frames,
                              DeepDetectionReader* deep);

struct VideoRunStatus {
  std::string video_id;
  bool ok = false;
  std::string error;
};

/// Reads the entry's inputs, runs it and writes its dataset files into out_dir.
/// Failures are reported in the status, never thrown.
VideoRunStatus run_video(const ManifestEntry& entry, const ValidatedConfig& cfg,
                         const std::filesystem::path& out_dir);

/// Runs every entry on up to `workers` threads; results follow manifest order.
std::vector<VideoRunStatus> run_batch(const std::vector<ManifestEntry>& entries,
                                      const ValidatedConfig& cfg,
                                      const std::filesystem::path& out_dir, int workers);

struct BenchResult {
  std::int64_t frames = 0;
  double full_seconds = 0.0;
  double lowres_seconds = 0.0;
  std::int64_t lowres_frames = 0;  // frames handled on the fast path in the low-res run

  double full_fps() const { return full_seconds > 0 ? frames / full_seconds : 0.0; }
  double lowres_fps() const { return lowres_seconds > 0 ? frames / lowres_seconds : 0.0; }
  double ratio() const { return full_seconds > 0 && lowres_seconds > 0 ? full_seconds / lowres_seconds : 0.0; }
};

/// Times the engine on the same frames with the low-res path disabled and enabled.
/// `detections`, when given, is re-read for each run.
BenchResult bench(VectorFrameSource& frames, const VideoMeta& meta, const ValidatedConfig& cfg,
                  const std::optional<std::filesystem::path>& detections = std::nullopt);

}  // namespace pollitrack
