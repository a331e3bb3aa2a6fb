#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"

namespace pollitrack {

struct FlowerEpoch {
  std::int64_t frame_index = 0;
  Point center;
  double radius = 0.0;
  bool detected = false;
};

struct FlowerRecord {
  std::string flower_id;  // "F" + ordinal, never reused within a video
  Point center;
  double radius = 0.0;
  std::vector<FlowerEpoch> epoch_history;
};

/// Radius covering the flower's dorsal area plus a boundary margin:
/// max(w, h) / 2 * (1 + margin_fraction).
double flower_radius(Extent extent, double margin_fraction);

enum class FlowerEventKind : std::uint8_t { Registered, Updated, CarriedForward };

struct FlowerEvent {
  FlowerEventKind kind = FlowerEventKind::Registered;
  std::size_t flower_index = 0;
  std::int64_t frame_index = 0;
};

/// Flower positions refreshed at update epochs (frame 0 and every
/// flower_update_interval_frames). Positions are constant between epochs.
class FlowerTracker {
 public:
  explicit FlowerTracker(const ValidatedConfig& cfg);

  bool is_epoch(std::int64_t frame_index) const noexcept;

  /// Associates the current positions with the new flower detections. Matched
  /// flowers move to the detection; unmatched ones keep their last position and
  /// radius; unmatched detections become new flowers. Throws std::logic_error off-epoch.
  std::vector<FlowerEvent> update(const std::vector<Detection>& flower_detections,
                                  std::int64_t frame_index);

  const std::vector<FlowerRecord>& flowers() const noexcept { return flowers_; }

 private:
  int interval_;
  double margin_;
  double gate_;
  std::int64_t last_epoch_ = -1;
  std::vector<FlowerRecord> flowers_;
};

}  // namespace pollitrack
