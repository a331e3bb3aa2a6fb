#include "pollitrack/visits.hpp"

#include <stdexcept>

namespace pollitrack {

std::string_view visit_kind_name(VisitKind k) noexcept {
  return k == VisitKind::Visit ? "visit" : "revisit";
}

std::optional<VisitKind> parse_visit_kind(std::string_view s) noexcept {
  if (s == "visit") return VisitKind::Visit;
  if (s == "revisit") return VisitKind::ReVisit;
  return std::nullopt;
}

std::optional<std::size_t> containing_flower(Point p, std::span<const FlowerRecord> flowers) {
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < flowers.size(); ++i) {
    const double d = distance(p, flowers[i].center);
    if (d > flowers[i].radius) continue;
    if (!best || d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

VisitDetector::VisitDetector(int visit_dwell_frames) : dwell_threshold_(visit_dwell_frames) {
  if (visit_dwell_frames < 1) throw std::invalid_argument("visit_dwell_frames must be >= 1");
}

std::optional<VisitBoundary> VisitDetector::end_run(int track_id, Dwell& d) {
  std::optional<VisitBoundary> out;
  if (d.run_flower && d.qualified) {
    VisitEvent ev{track_id,     d.track_code,  d.species, d.run_flower_id,
                  d.run_entry, d.last_inside, d.kind};
    visits_.push_back(ev);
    d.visited.insert(*d.run_flower);
    d.last_completed = d.run_flower;
    out = VisitBoundary{VisitBoundaryKind::Closed, std::move(ev)};
  }
  d.run_flower.reset();
  d.qualified = false;
  return out;
}

std::optional<VisitBoundary> VisitDetector::update(int track_id, const std::string& track_code,
                                                   Species species, Point position,
                                                   std::int64_t frame_index,
                                                   std::span<const FlowerRecord> flowers) {
  Dwell& d = state_[track_id];
  d.track_code = track_code;
  d.species = species;
  const auto inside = containing_flower(position, flowers);

  std::optional<VisitBoundary> out;
  if (d.run_flower && d.run_flower != inside) out = end_run(track_id, d);
  if (!inside) return out;

  if (!d.run_flower) {
    d.run_flower = inside;
    d.run_flower_id = flowers[*inside].flower_id;
    d.run_entry = frame_index;
    d.qualified = false;
  }
  d.last_inside = frame_index;
  if (!d.qualified && frame_index - d.run_entry + 1 > dwell_threshold_) {
    d.qualified = true;
    const bool returned = d.visited.count(*inside) > 0 && d.last_completed != inside;
    d.kind = returned ? VisitKind::ReVisit : VisitKind::Visit;
    out = VisitBoundary{VisitBoundaryKind::Opened,
                        VisitEvent{track_id, track_code, species, d.run_flower_id, d.run_entry,
                                   frame_index, d.kind}};
  }
  return out;
}

std::optional<VisitBoundary> VisitDetector::close_track(int track_id) {
  auto it = state_.find(track_id);
  if (it == state_.end()) return std::nullopt;
  auto out = end_run(track_id, it->second);
  state_.erase(it);
  return out;
}

std::optional<std::string> VisitDetector::current_flower(int track_id) const {
  auto it = state_.find(track_id);
  if (it == state_.end() || !it->second.run_flower) return std::nullopt;
  return it->second.run_flower_id;
}

}  // namespace pollitrack
