#include "pollitrack/flower_tracker.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

#include "pollitrack/assignment.hpp"

namespace pollitrack {

double flower_radius(Extent extent, double margin_fraction) {
  if (!(extent.w > 0.0) || !(extent.h > 0.0)) throw std::invalid_argument("flower extent must be > 0");
  if (!(margin_fraction >= 0.0)) throw std::invalid_argument("margin_fraction must be >= 0");
  return std::max(extent.w, extent.h) / 2.0 * (1.0 + margin_fraction);
}

FlowerTracker::FlowerTracker(const ValidatedConfig& cfg)
    : interval_(cfg->flower_update_interval_frames),
      margin_(cfg->flower_radius_margin_fraction),
      gate_(cfg->flower_gate_px) {}

bool FlowerTracker::is_epoch(std::int64_t frame_index) const noexcept {
  return frame_index >= 0 && frame_index % interval_ == 0;
}

std::vector<FlowerEvent> FlowerTracker::update(const std::vector<Detection>& flower_detections,
                                               std::int64_t frame_index) {
  if (!is_epoch(frame_index)) {
    throw std::logic_error(fmt::format("flower update at frame {} is not an epoch", frame_index));
  }
  if (frame_index <= last_epoch_) {
    throw std::logic_error(fmt::format("flower epoch {} repeated or out of order", frame_index));
  }
  last_epoch_ = frame_index;

  std::vector<FlowerEvent> events;
  CostMatrix cost(static_cast<int>(flowers_.size()), static_cast<int>(flower_detections.size()));
  for (std::size_t i = 0; i < flowers_.size(); ++i) {
    for (std::size_t j = 0; j < flower_detections.size(); ++j) {
      // predicted position is the current position
      cost(static_cast<int>(i), static_cast<int>(j)) =
          distance(flowers_[i].center, flower_detections[j].center);
    }
  }
  const Assignment a = solve_assignment(cost, gate_);

  for (const auto& [row, col] : a.pairs) {
    auto& f = flowers_[static_cast<std::size_t>(row)];
    const auto& d = flower_detections[static_cast<std::size_t>(col)];
    f.center = d.center;
    f.radius = flower_radius(d.extent, margin_);
    f.epoch_history.push_back({frame_index, f.center, f.radius, true});
    events.push_back({FlowerEventKind::Updated, static_cast<std::size_t>(row), frame_index});
  }
  for (int row : a.unassigned_rows) {
    auto& f = flowers_[static_cast<std::size_t>(row)];
    f.epoch_history.push_back({frame_index, f.center, f.radius, false});
    events.push_back({FlowerEventKind::CarriedForward, static_cast<std::size_t>(row), frame_index});
  }
  for (int col : a.unassigned_cols) {
    const auto& d = flower_detections[static_cast<std::size_t>(col)];
    FlowerRecord f;
    f.flower_id = fmt::format("F{}", flowers_.size());
    f.center = d.center;
    f.radius = flower_radius(d.extent, margin_);
    f.epoch_history.push_back({frame_index, f.center, f.radius, true});
    flowers_.push_back(std::move(f));
    events.push_back({FlowerEventKind::Registered, flowers_.size() - 1, frame_index});
  }
  std::sort(events.begin(), events.end(),
            [](const FlowerEvent& x, const FlowerEvent& y) { return x.flower_index < y.flower_index; });
  return events;
}

}  // namespace pollitrack
