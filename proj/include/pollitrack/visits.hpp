#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/flower_tracker.hpp"

namespace pollitrack {

enum class VisitKind : std::uint8_t { Visit, ReVisit };

std::string_view visit_kind_name(VisitKind k) noexcept;
std::optional<VisitKind> parse_visit_kind(std::string_view s) noexcept;

struct VisitEvent {
  int track_id = 0;
  std::string track_code;
  Species species = Species::Honeybee;
  std::string flower_id;
  std::int64_t entry_frame = 0;
  std::int64_t exit_frame = 0;
  VisitKind kind = VisitKind::Visit;

  std::int64_t dwell_frames() const noexcept { return exit_frame - entry_frame + 1; }
};

enum class VisitBoundaryKind : std::uint8_t { Opened, Closed };

struct VisitBoundary {
  VisitBoundaryKind kind = VisitBoundaryKind::Opened;
  VisitEvent event;  // for Opened, exit_frame is the qualifying frame
};

/// Index of the flower whose radius contains p, nearest centre first (lower
/// index on exact ties); nullopt when p is outside every flower.
std::optional<std::size_t> containing_flower(Point p, std::span<const FlowerRecord> flowers);

/// Dwell-based visit detection. An insect is inside a flower when its distance
/// to the centre is at most the radius. A visit opens once an inside run spans
/// more than `visit_dwell_frames` frames and closes when the insect is seen
/// outside that flower or its track closes. Frames where the track was not
/// observed neither extend nor break a run. A visit is a ReVisit when the
/// same track already completed a visit to this flower and its most recent
/// completed visit was to a different flower.
class VisitDetector {
 public:
  explicit VisitDetector(int visit_dwell_frames);

  std::optional<VisitBoundary> update(int track_id, const std::string& track_code,
                                      Species species, Point position, std::int64_t frame_index,
                                      std::span<const FlowerRecord> flowers);

  /// Ends any run of the track; returns the closing boundary if a visit was open.
  std::optional<VisitBoundary> close_track(int track_id);

  /// Flower the track is currently inside, if any.
  std::optional<std::string> current_flower(int track_id) const;

  /// Completed visits in completion order.
  const std::vector<VisitEvent>& visits() const noexcept { return visits_; }

 private:
  struct Dwell {
    std::optional<std::size_t> run_flower;
    std::string run_flower_id;
    std::int64_t run_entry = 0;
    std::int64_t last_inside = 0;
    bool qualified = false;
    VisitKind kind = VisitKind::Visit;
    std::string track_code;
    Species species = Species::Honeybee;
    std::set<std::size_t> visited;
    std::optional<std::size_t> last_completed;
  };

  std::optional<VisitBoundary> end_run(int track_id, Dwell& d);

  int dwell_threshold_;
  std::map<int, Dwell> state_;
  std::vector<VisitEvent> visits_;
};

}  // namespace pollitrack
