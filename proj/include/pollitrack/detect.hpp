#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/image.hpp"

namespace pollitrack {

enum class ProcessingMode : std::uint8_t { Full, LowRes };

std::string_view mode_name(ProcessingMode m) noexcept;

/// Binary foreground grid for one processed frame (full or low resolution).
struct ForegroundMask {
  std::int64_t frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 1 = foreground

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

struct BackgroundParams {
  int history_length = 50;
  int k_neighbours = 3;
  int distance_threshold = 12;
  int update_stride = 2;
};

BackgroundParams background_params(const EngineConfig& cfg);

/// Per-pixel K-nearest-neighbour background classifier over a ring buffer of
/// past grayscale samples. A pixel is foreground when fewer than K of its
/// samples lie within the distance threshold of the current intensity.
/// The first frame seeds every slot of the history.
class BackgroundModel {
 public:
  explicit BackgroundModel(BackgroundParams params);

  /// Classifies the frame, then pushes it into the history every update_stride
  /// frames (replacing the oldest sample). Throws StreamError on size change.
  ForegroundMask update(const GrayImage& frame, std::int64_t frame_index);

  const BackgroundParams& params() const noexcept { return params_; }
  bool initialised() const noexcept { return width_ > 0; }

 private:
  BackgroundParams params_;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> samples_;  // pixel-major: history_length samples per pixel
  int next_slot_ = 0;
  std::int64_t frames_seen_ = 0;
};

/// 8-connected components with area >= min_area_px. Detections carry
/// source=Segmentation, species=Unknown, confidence 1, centroid and bounding box.
/// `scale` maps mask coordinates back to full-resolution pixels.
std::vector<Detection> extract_blobs(const ForegroundMask& mask, int min_area_px,
                                     double scale = 1.0);

/// Stream reader for deep-detector JSON Lines
/// ({video_id, frame, class, cx, cy, w, h, conf}), frames non-decreasing.
class DeepDetectionReader {
 public:
  /// Records whose video_id differs from `video_id` are skipped when a filter is given.
  DeepDetectionReader(std::istream& in, int frame_width, int frame_height,
                      std::optional<std::string> video_id = std::nullopt);
  DeepDetectionReader(const std::filesystem::path& path, int frame_width, int frame_height,
                      std::optional<std::string> video_id = std::nullopt);

  DeepDetectionReader(const DeepDetectionReader&) = delete;
  DeepDetectionReader& operator=(const DeepDetectionReader&) = delete;

  /// All records of the given frame. Frames must be requested in increasing order;
  /// records of frames never requested are discarded.
  std::vector<Detection> detections_for(std::int64_t frame_index);

  /// Highest frame index seen in the stream so far.
  std::int64_t last_frame_seen() const noexcept { return last_record_frame_; }

  /// True once every record has been read and handed out or discarded.
  bool exhausted() const noexcept { return eof_ && !pending_; }

 private:
  std::optional<Detection> read_record();

  std::ifstream owned_;
  std::istream* in_;
  int frame_width_;
  int frame_height_;
  std::optional<std::string> video_id_;
  std::size_t line_no_ = 0;
  std::optional<Detection> pending_;
  std::int64_t last_record_frame_ = -1;
  std::int64_t last_requested_ = -1;
  bool eof_ = false;
};

/// Parses one JSONL record; line is used for error messages.
Detection parse_detection_record(const std::string& line, std::size_t line_no, int frame_width,
                                 int frame_height, std::string* video_id_out = nullptr);

std::string detection_to_json(const Detection& d, const std::string& video_id,
                              std::optional<int> true_track_id = std::nullopt);

/// Everything the engine knows about one frame's detections.
struct DetectionBatch {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;
  ProcessingMode mode = ProcessingMode::Full;
  int foreground_region_count = 0;
};

enum class DetectionSourceChoice : std::uint8_t { Segmentation, DeepDetector };

struct ArbitrationInput {
  bool segmentation_available = true;
  bool deep_available = true;
  int active_track_count = 0;
  int fg_region_count = 0;
  bool flower_epoch_due = false;
};

/// Segmentation is used only when it is unambiguous: tracks exist, no flower
/// epoch is due, and the foreground holds exactly one region per active track.
/// More regions may be a new insect; fewer means a tracked insect was lost.
/// Either case falls back to the deep detector.
DetectionSourceChoice arbitrate(const ArbitrationInput& in) noexcept;

}  // namespace pollitrack
