#include "pollitrack/insect_tracker.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "pollitrack/assignment.hpp"

namespace pollitrack {

std::string_view point_source_name(PointSource s) noexcept {
  switch (s) {
    case PointSource::DeepDetector: return "deep";
    case PointSource::Segmentation: return "segmentation";
    case PointSource::Interpolated: return "interpolated";
  }
  return "deep";
}

Point predict_position(const InsectTrack& track) {
  if (track.points.empty()) throw std::logic_error("predict_position on an empty track");
  return predict_position(track, track.points.back().frame_index + 1);
}

Point predict_position(const InsectTrack& track, std::int64_t frame_index) {
  if (track.points.empty()) throw std::logic_error("predict_position on an empty track");
  const auto& last = track.points.back();
  if (track.points.size() == 1) return last.position;
  const auto& prev = track.points[track.points.size() - 2];
  const double dt = static_cast<double>(last.frame_index - prev.frame_index);
  const double ahead = static_cast<double>(frame_index - last.frame_index);
  const double vx = (last.position.x - prev.position.x) / dt;
  const double vy = (last.position.y - prev.position.y) / dt;
  return {last.position.x + vx * ahead, last.position.y + vy * ahead};
}

double path_length(const InsectTrack& track) {
  double total = 0.0;
  for (std::size_t i = 1; i < track.points.size(); ++i) {
    total += distance(track.points[i - 1].position, track.points[i].position);
  }
  return total;
}

InsectTracker::InsectTracker(const ValidatedConfig& cfg, VideoMeta meta)
    : cfg_(cfg.get()), meta_(meta) {}

std::vector<int> InsectTracker::live_track_ids() const {
  std::vector<int> ids;
  for (const auto& t : tracks_) {
    if (t.status != TrackStatus::Closed) ids.push_back(t.id);
  }
  return ids;
}

int InsectTracker::live_track_count() const noexcept {
  int n = 0;
  for (const auto& t : tracks_) n += t.status != TrackStatus::Closed ? 1 : 0;
  return n;
}

void InsectTracker::close(InsectTrack& t, std::int64_t frame, std::vector<TrackEvent>& events) {
  t.status = TrackStatus::Closed;
  events.push_back({TrackEventKind::Closed, t.id, frame, t.points.back().position, {}});
}

std::vector<TrackEvent> InsectTracker::step(const DetectionBatch& batch) {
  const std::int64_t frame = batch.frame_index;
  if (frame <= last_frame_) {
    throw StreamError(fmt::format("tracker received frame {} after frame {}", frame, last_frame_));
  }
  last_frame_ = frame;
  std::vector<TrackEvent> events;

  std::vector<const Detection*> dets;
  for (const auto& d : batch.detections) {
    if (is_insect(d.species) || d.source == DetectionSource::Segmentation) dets.push_back(&d);
  }
  const std::vector<int> live = live_track_ids();

  CostMatrix cost(static_cast<int>(live.size()), static_cast<int>(dets.size()));
  for (std::size_t i = 0; i < live.size(); ++i) {
    const Point predicted = predict_position(tracks_[static_cast<std::size_t>(live[i])], frame);
    for (std::size_t j = 0; j < dets.size(); ++j) {
      cost(static_cast<int>(i), static_cast<int>(j)) = distance(predicted, dets[j]->center);
    }
  }
  const Assignment assignment = solve_assignment(cost, cfg_.association_gate_px);

  for (const auto& [row, col] : assignment.pairs) {
    InsectTrack& t = tracks_[static_cast<std::size_t>(live[static_cast<std::size_t>(row)])];
    const Detection& d = *dets[static_cast<std::size_t>(col)];
    const TrackPoint last = t.points.back();
    const auto gap = frame - last.frame_index;
    for (std::int64_t k = 1; k < gap; ++k) {
      const double a = static_cast<double>(k) / static_cast<double>(gap);
      t.points.push_back({last.frame_index + k,
                          {last.position.x + a * (d.center.x - last.position.x),
                           last.position.y + a * (d.center.y - last.position.y)},
                          PointSource::Interpolated});
    }
    t.points.push_back({frame, d.center,
                        d.source == DetectionSource::Segmentation ? PointSource::Segmentation
                                                                  : PointSource::DeepDetector});
    t.missed_frames = 0;
    t.status = TrackStatus::Active;
  }

  for (int row : assignment.unassigned_rows) {
    InsectTrack& t = tracks_[static_cast<std::size_t>(live[static_cast<std::size_t>(row)])];
    t.missed_frames = static_cast<int>(frame - t.last_frame());
    t.status = TrackStatus::Coasting;
    if (t.missed_frames >= cfg_.track_timeout_frames) close(t, frame, events);
  }

  for (int col : assignment.unassigned_cols) {
    const Detection& d = *dets[static_cast<std::size_t>(col)];
    // Segmentation cannot tell what an object is, so it never opens a track.
    if (d.source != DetectionSource::DeepDetector || !is_insect(d.species)) continue;
    const int id = static_cast<int>(tracks_.size());
    tracks_.push_back(InsectTrack{.id = id,
                                  .track_code = make_track_code(meta_, frame, d.species),
                                  .species = d.species,
                                  .points = {{frame, d.center, PointSource::DeepDetector}},
                                  .status = TrackStatus::Active,
                                  .missed_frames = 0,
                                  .visits = {},
                                  .first_extent = d.extent});
    events.push_back({TrackEventKind::Created, id, frame, d.center, d.extent});
  }
  return events;
}

std::vector<TrackEvent> InsectTracker::close_all() {
  std::vector<TrackEvent> events;
  for (auto& t : tracks_) {
    if (t.status != TrackStatus::Closed) close(t, std::max(last_frame_, t.last_frame()), events);
  }
  return events;
}

TrackVerdict finalize_track(const InsectTrack& track, const EngineConfig& cfg) {
  if (track.status != TrackStatus::Closed) throw std::logic_error("finalize_track on a live track");
  if (track.visits.empty() && path_length(track) < cfg.false_positive_track_length_px) {
    return TrackVerdict::CulledFalsePositive;
  }
  return TrackVerdict::Accepted;
}

ProcessingMode select_processing_mode(int active_track_count,
                                      bool lowres_candidate_found) noexcept {
  return active_track_count == 0 && !lowres_candidate_found ? ProcessingMode::LowRes
                                                            : ProcessingMode::Full;
}

}  // namespace pollitrack
