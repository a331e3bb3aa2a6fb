#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/detect.hpp"

namespace pollitrack {

/// Where a track point came from. Interpolated points fill frames a track
/// coasted through before it was re-acquired.
enum class PointSource : std::uint8_t { DeepDetector, Segmentation, Interpolated };

std::string_view point_source_name(PointSource s) noexcept;

struct TrackPoint {
  std::int64_t frame_index = 0;
  Point position;
  PointSource source = PointSource::DeepDetector;
};

enum class TrackStatus : std::uint8_t { Active, Coasting, Closed };

struct InsectTrack {
  int id = 0;  // order of creation within the video
  TrackCode track_code;
  Species species = Species::Honeybee;
  std::vector<TrackPoint> points;
  TrackStatus status = TrackStatus::Active;
  int missed_frames = 0;
  std::vector<std::size_t> visits;  // indices into the video's visit log
  Extent first_extent;              // box of the creating detection

  std::int64_t first_frame() const { return points.front().frame_index; }
  std::int64_t last_frame() const { return points.back().frame_index; }
};

/// Constant-velocity extrapolation from the last two points; the last point
/// when only one exists. Throws std::logic_error on an empty track.
Point predict_position(const InsectTrack& track);

/// Same model evaluated `frame_index - last_frame` frames ahead (coasting tracks).
Point predict_position(const InsectTrack& track, std::int64_t frame_index);

/// Sum of distances between consecutive points.
double path_length(const InsectTrack& track);

enum class TrackEventKind : std::uint8_t { Created, Closed };

struct TrackEvent {
  TrackEventKind kind = TrackEventKind::Created;
  int track_id = 0;
  std::int64_t frame_index = 0;
  Point center;   // Created: detection box for the verification snapshot
  Extent extent;
};

/// Single-writer tracker state for one video.
class InsectTracker {
 public:
  InsectTracker(const ValidatedConfig& cfg, VideoMeta meta);

  /// Predicts every live track, associates insect-class and segmentation
  /// detections by gated Euclidean Hungarian matching, extends matched tracks,
  /// coasts and times out the rest, and opens tracks for unmatched deep
  /// detections. Throws StreamError when frames do not increase.
  std::vector<TrackEvent> step(const DetectionBatch& batch);

  /// Closes every live track (end of video).
  std::vector<TrackEvent> close_all();

  const std::vector<InsectTrack>& tracks() const noexcept { return tracks_; }
  InsectTrack& track(int id) { return tracks_.at(static_cast<std::size_t>(id)); }
  const InsectTrack& track(int id) const { return tracks_.at(static_cast<std::size_t>(id)); }

  /// Ids of tracks that are Active or Coasting.
  std::vector<int> live_track_ids() const;
  int live_track_count() const noexcept;

  std::int64_t last_frame() const noexcept { return last_frame_; }

 private:
  void close(InsectTrack& t, std::int64_t frame, std::vector<TrackEvent>& events);

  EngineConfig cfg_;
  VideoMeta meta_;
  std::vector<InsectTrack> tracks_;
  std::int64_t last_frame_ = -1;
};

enum class TrackVerdict : std::uint8_t { Accepted, CulledFalsePositive };

/// A closed track is a false positive when it never visited a flower and its
/// path is shorter than false_positive_track_length_px.
TrackVerdict finalize_track(const InsectTrack& track, const EngineConfig& cfg);

/// LowRes only while nothing is tracked and the low-res mask shows no insect-sized blob.
ProcessingMode select_processing_mode(int active_track_count, bool lowres_candidate_found) noexcept;

}  // namespace pollitrack
