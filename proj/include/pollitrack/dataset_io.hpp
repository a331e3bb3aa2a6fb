#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pollitrack/metrics.hpp"
#include "pollitrack/pipeline.hpp"
#include "pollitrack/simulate.hpp"

namespace pollitrack {

// File names inside a dataset directory.
std::filesystem::path tracks_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path visits_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path flowers_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path summary_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path truth_tracks_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path truth_visits_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path truth_flowers_file(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path truth_summary_file(const std::filesystem::path& dir, const std::string& video_id);

std::string tracks_csv(const VideoResult& r);
std::string visits_csv(const VideoResult& r);
std::string flowers_csv(const std::vector<FlowerRecord>& flowers);
std::string summary_json(const VideoResult& r);

/// Writes the four per-video files; throws std::runtime_error on I/O failure.
void write_video_dataset(const std::filesystem::path& dir, const VideoResult& r);

/// Truth files in the engine schemas plus true_track_id (and body w, h on track rows).
void write_truth_dataset(const std::filesystem::path& dir, const std::string& video_id,
                         const GroundTruth& truth);

struct VideoSummary {
  std::string video_id;
  int camera_number = 0;
  int fertilisation_threshold = 0;
  std::int64_t frames = 0;
  std::map<Species, int> track_counts;
  int frame_width = 0;
  int frame_height = 0;
  std::vector<std::string> flower_ids;
  std::vector<FlowerRecord> final_flowers;  // without epoch history
};

VideoSummary read_summary(const std::filesystem::path& path);

struct PredictedDataset {
  std::vector<PredictedTrack> tracks;  // accepted tracks; id = position in this vector
  std::vector<VisitEvent> visits;      // track_id refers to `tracks`
  std::map<std::string, Point> final_flowers;
};

struct TruthDataset {
  std::vector<TruthTrack> tracks;
  std::vector<VisitEvent> visits;  // track_id holds the true id
  std::map<std::string, Point> final_flowers;
  std::int64_t frame_count = 0;
};

/// Throws ParseError on schema violations.
PredictedDataset read_predicted(const std::filesystem::path& dir, const std::string& video_id);
TruthDataset read_truth(const std::filesystem::path& dir, const std::string& video_id);

/// Visit log for metrics, reading the visits and summary files of one video.
/// Insects are keyed "<video_id>/<track_key>" and flowers "<video_id>/<flower_id>".
void add_video_to_log(VisitLog& log, const std::filesystem::path& dir, const VideoSummary& summary);

}  // namespace pollitrack
