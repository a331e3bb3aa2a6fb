#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pollitrack/errors.hpp"

namespace pollitrack {

// ---------------------------------------------------------------------------
// Species
// ---------------------------------------------------------------------------

/// Object classes the engine reasons about. Unknown marks segmentation
/// detections whose class is inherited from the track they join.
enum class Species : std::uint8_t { Honeybee, Syrphidae, Lepidoptera, Vespidae, Flower, Unknown };

inline constexpr Species kInsectSpecies[] = {Species::Honeybee, Species::Syrphidae,
                                             Species::Lepidoptera, Species::Vespidae};

constexpr bool is_insect(Species s) noexcept {
  return s == Species::Honeybee || s == Species::Syrphidae || s == Species::Lepidoptera ||
         s == Species::Vespidae;
}

/// Two-digit suffix used in track codes. Only defined for insect classes.
int species_suffix(Species s);
std::optional<Species> species_from_suffix(int suffix) noexcept;

/// Lower-case name used in every text format ("honeybee", "flower", ...).
std::string_view species_name(Species s) noexcept;

/// Accepts canonical names plus the common aliases hoverfly, moth, butterfly, wasp.
std::optional<Species> parse_species(std::string_view name) noexcept;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Pixel coordinates, origin top-left, y downward.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Extent {
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

double distance(Point a, Point b) noexcept;

/// True when p lies in the axis-aligned box of the given extent centred on c (edges inclusive).
bool inside_box(Point p, Point c, Extent e) noexcept;

// ---------------------------------------------------------------------------
// Video metadata and detections
// ---------------------------------------------------------------------------

struct VideoMeta {
  int camera_number = 1;
  std::chrono::year_month_day record_date{std::chrono::year{2021}, std::chrono::March,
                                          std::chrono::day{1}};
  std::chrono::seconds record_start_time{0};  // since midnight
  double fps = 30.0;
  int frame_width = 1920;
  int frame_height = 1080;
};

/// Throws ConfigError when fps or frame size are not positive or the date is invalid.
void validate_meta(const VideoMeta& meta);

std::optional<std::chrono::year_month_day> parse_date(std::string_view text) noexcept;
std::optional<std::chrono::seconds> parse_time_of_day(std::string_view text) noexcept;
std::string format_date(std::chrono::year_month_day d);
std::string format_time_of_day(std::chrono::seconds t);

enum class DetectionSource : std::uint8_t { DeepDetector, Segmentation };

std::string_view source_name(DetectionSource s) noexcept;

struct Detection {
  std::int64_t frame_index = 0;
  Species species = Species::Unknown;
  Point center;
  Extent extent;
  double confidence = 1.0;
  DetectionSource source = DetectionSource::DeepDetector;
};

/// Checks the Detection invariants against a frame size; returns a reason on failure.
std::optional<std::string> check_detection(const Detection& d, int frame_width, int frame_height);

// ---------------------------------------------------------------------------
// Track codes
// ---------------------------------------------------------------------------

/// Eleven decimal digits: camera (1) + day of month (2) + HHMMSS of the first
/// detection (6) + species suffix (2).
class TrackCode {
 public:
  static TrackCode parse(std::string_view text);

  const std::string& str() const noexcept { return digits_; }

  friend bool operator==(const TrackCode&, const TrackCode&) = default;
  friend auto operator<=>(const TrackCode&, const TrackCode&) = default;

 private:
  friend TrackCode make_track_code(const VideoMeta&, std::int64_t, Species);
  explicit TrackCode(std::string digits) : digits_(std::move(digits)) {}

  std::string digits_;
};

struct DecodedTrackCode {
  int camera_number = 0;
  unsigned day_of_month = 0;
  std::chrono::seconds time_of_day{0};
  Species species = Species::Honeybee;

  friend bool operator==(const DecodedTrackCode&, const DecodedTrackCode&) = default;
};

/// Wall-clock time of the first detection is record_start_time + frame/fps,
/// truncated to whole seconds. Passing midnight rolls the day of month forward.
TrackCode make_track_code(const VideoMeta& meta, std::int64_t first_detection_frame,
                          Species species);

DecodedTrackCode decode_track_code(const TrackCode& code);

// ---------------------------------------------------------------------------
// Engine configuration
// ---------------------------------------------------------------------------

struct EngineConfig {
  int flower_update_interval_frames = 3000;
  int visit_dwell_frames = 5;  // a visit needs strictly more consecutive frames than this
  double false_positive_track_length_px = 10.0;
  int min_track_frames = 5;
  int fertilisation_threshold = 4;
  double association_gate_px = 150.0;
  int track_timeout_frames = 15;
  double flower_radius_margin_fraction = 0.2;
  double flower_gate_px = 60.0;
  double lowres_scale_factor = 4.0;
  bool lowres_enabled = true;
  int bg_history_length = 50;
  int bg_k_neighbours = 3;
  int bg_distance_threshold = 12;
  int bg_update_stride = 2;
  int min_blob_area_px = 40;
};

/// An EngineConfig whose bounds have been checked. Only validate_config builds one.
class ValidatedConfig {
 public:
  const EngineConfig& get() const noexcept { return cfg_; }
  const EngineConfig* operator->() const noexcept { return &cfg_; }

 private:
  friend ValidatedConfig validate_config(const EngineConfig& cfg);
  explicit ValidatedConfig(EngineConfig cfg) : cfg_(cfg) {}

  EngineConfig cfg_;
};

ValidatedConfig validate_config(const EngineConfig& cfg);

/// Names of every EngineConfig field, in declaration order.
const std::vector<std::string>& config_keys();

/// Applies key=value overrides onto cfg. Unknown keys and unparsable values throw ConfigError.
void apply_config_overrides(EngineConfig& cfg, const std::map<std::string, std::string>& overrides);

/// Parses a key=value file body ('#' starts a comment, blank lines ignored).
std::map<std::string, std::string> parse_key_value_text(std::istream& in);

/// Defaults, then the file (if any), then CLI overrides; validated.
ValidatedConfig load_config(const std::optional<std::string>& path,
                            const std::map<std::string, std::string>& cli_overrides = {});

std::string config_to_text(const EngineConfig& cfg);

}  // namespace pollitrack
