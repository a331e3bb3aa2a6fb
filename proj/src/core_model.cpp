#include "pollitrack/core_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <variant>

namespace pollitrack {

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration";
        for (const auto& i : issues) msg += "; " + i;
        return msg;
      }()),
      issues_(std::move(issues)) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, what) : what), line_(line) {}

// ---------------------------------------------------------------------------

int species_suffix(Species s) {
  switch (s) {
    case Species::Honeybee: return 0;
    case Species::Syrphidae: return 1;
    case Species::Lepidoptera: return 2;
    case Species::Vespidae: return 3;
    default: break;
  }
  throw std::invalid_argument(fmt::format("no track-code suffix for class '{}'", species_name(s)));
}

std::optional<Species> species_from_suffix(int suffix) noexcept {
  switch (suffix) {
    case 0: return Species::Honeybee;
    case 1: return Species::Syrphidae;
    case 2: return Species::Lepidoptera;
    case 3: return Species::Vespidae;
    default: return std::nullopt;
  }
}

std::string_view species_name(Species s) noexcept {
  switch (s) {
    case Species::Honeybee: return "honeybee";
    case Species::Syrphidae: return "syrphidae";
    case Species::Lepidoptera: return "lepidoptera";
    case Species::Vespidae: return "vespidae";
    case Species::Flower: return "flower";
    case Species::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Species> parse_species(std::string_view name) noexcept {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "honeybee" || lower == "bee") return Species::Honeybee;
  if (lower == "syrphidae" || lower == "hoverfly") return Species::Syrphidae;
  if (lower == "lepidoptera" || lower == "moth" || lower == "butterfly") return Species::Lepidoptera;
  if (lower == "vespidae" || lower == "wasp") return Species::Vespidae;
  if (lower == "flower") return Species::Flower;
  if (lower == "unknown") return Species::Unknown;
  return std::nullopt;
}

double distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

bool inside_box(Point p, Point c, Extent e) noexcept {
  return std::abs(p.x - c.x) <= e.w / 2.0 && std::abs(p.y - c.y) <= e.h / 2.0;
}

std::string_view source_name(DetectionSource s) noexcept {
  return s == DetectionSource::DeepDetector ? "deep" : "segmentation";
}

std::optional<std::string> check_detection(const Detection& d, int frame_width, int frame_height) {
  if (d.frame_index < 0) return "negative frame index";
  if (!(d.extent.w > 0.0) || !(d.extent.h > 0.0)) return "extent must be strictly positive";
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) return "confidence outside [0,1]";
  if (!(d.center.x >= 0.0 && d.center.x < frame_width && d.center.y >= 0.0 &&
        d.center.y < frame_height)) {
    return fmt::format("center ({}, {}) outside {}x{} frame", d.center.x, d.center.y,
                       frame_width, frame_height);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Dates and times

void validate_meta(const VideoMeta& meta) {
  std::vector<std::string> issues;
  if (!(meta.fps > 0.0)) issues.push_back("fps must be > 0");
  if (meta.frame_width <= 0) issues.push_back("frame_width must be > 0");
  if (meta.frame_height <= 0) issues.push_back("frame_height must be > 0");
  if (!meta.record_date.ok()) issues.push_back("record_date is not a valid calendar date");
  if (meta.record_start_time < std::chrono::seconds{0} ||
      meta.record_start_time >= std::chrono::hours{24}) {
    issues.push_back("record_start_time must be within one day");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

namespace {

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<std::chrono::year_month_day> parse_date(std::string_view text) noexcept {
  // YYYY-MM-DD or DD/MM/YYYY
  using namespace std::chrono;
  auto parts = split(trim(text), '-');
  std::optional<int> y, m, d;
  if (parts.size() == 3) {
    y = to_int(parts[0]), m = to_int(parts[1]), d = to_int(parts[2]);
  } else {
    parts = split(trim(text), '/');
    if (parts.size() != 3) return std::nullopt;
    d = to_int(parts[0]), m = to_int(parts[1]), y = to_int(parts[2]);
  }
  if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::optional<std::chrono::seconds> parse_time_of_day(std::string_view text) noexcept {
  auto parts = split(trim(text), ':');
  if (parts.size() != 3) return std::nullopt;
  auto h = to_int(parts[0]), m = to_int(parts[1]), s = to_int(parts[2]);
  if (!h || !m || !s || *h < 0 || *h > 23 || *m < 0 || *m > 59 || *s < 0 || *s > 59) {
    return std::nullopt;
  }
  return std::chrono::seconds{*h * 3600 + *m * 60 + *s};
}

std::string format_date(std::chrono::year_month_day d) {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

std::string format_time_of_day(std::chrono::seconds t) {
  const auto s = t.count();
  return fmt::format("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60);
}

// ---------------------------------------------------------------------------
// Track codes

TrackCode make_track_code(const VideoMeta& meta, std::int64_t first_detection_frame,
                          Species species) {
  using namespace std::chrono;
  if (meta.camera_number < 1 || meta.camera_number > 9) {
    throw ConfigError({fmt::format("camera_number {} does not fit in one digit",
                                   meta.camera_number)});
  }
  if (first_detection_frame < 0) throw std::invalid_argument("negative first_detection_frame");
  if (!(meta.fps > 0.0)) throw ConfigError({"fps must be > 0"});
  if (!meta.record_date.ok()) throw ConfigError({"record_date is not a valid calendar date"});

  const auto offset = static_cast<std::int64_t>(
      std::floor(static_cast<double>(first_detection_frame) / meta.fps));
  const std::int64_t total = meta.record_start_time.count() + offset;
  const std::int64_t day_shift = total / 86400;
  const std::int64_t tod = total % 86400;
  const year_month_day date{sys_days{meta.record_date} + days{day_shift}};

  return TrackCode(fmt::format("{}{:02}{:02}{:02}{:02}{:02}", meta.camera_number,
                               static_cast<unsigned>(date.day()), tod / 3600, (tod / 60) % 60,
                               tod % 60, species_suffix(species)));
}

TrackCode TrackCode::parse(std::string_view text) {
  if (text.size() != 11 ||
      !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError(fmt::format("track code '{}' is not 11 decimal digits", text), 0);
  }
  TrackCode code{std::string(text)};
  decode_track_code(code);  // validates the fields
  return code;
}

DecodedTrackCode decode_track_code(const TrackCode& code) {
  const std::string_view s = code.str();
  auto field = [&](std::size_t pos, std::size_t len) { return *to_int(s.substr(pos, len)); };
  DecodedTrackCode out;
  out.camera_number = field(0, 1);
  out.day_of_month = static_cast<unsigned>(field(1, 2));
  const int hh = field(3, 2), mm = field(5, 2), ss = field(7, 2);
  const auto sp = species_from_suffix(field(9, 2));
  if (out.camera_number < 1 || out.day_of_month < 1 || out.day_of_month > 31 || hh > 23 ||
      mm > 59 || ss > 59 || !sp) {
    throw ParseError(fmt::format("track code '{}' has out-of-range fields", s), 0);
  }
  out.time_of_day = std::chrono::seconds{hh * 3600 + mm * 60 + ss};
  out.species = *sp;
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

using FieldPtr = std::variant<int EngineConfig::*, double EngineConfig::*, bool EngineConfig::*>;

struct FieldDef {
  const char* name;
  FieldPtr ptr;
};

const std::vector<FieldDef>& field_defs() {
  static const std::vector<FieldDef> defs = {
      {"flower_update_interval_frames", &EngineConfig::flower_update_interval_frames},
      {"visit_dwell_frames", &EngineConfig::visit_dwell_frames},
      {"false_positive_track_length_px", &EngineConfig::false_positive_track_length_px},
      {"min_track_frames", &EngineConfig::min_track_frames},
      {"fertilisation_threshold", &EngineConfig::fertilisation_threshold},
      {"association_gate_px", &EngineConfig::association_gate_px},
      {"track_timeout_frames", &EngineConfig::track_timeout_frames},
      {"flower_radius_margin_fraction", &EngineConfig::flower_radius_margin_fraction},
      {"flower_gate_px", &EngineConfig::flower_gate_px},
      {"lowres_scale_factor", &EngineConfig::lowres_scale_factor},
      {"lowres_enabled", &EngineConfig::lowres_enabled},
      {"bg_history_length", &EngineConfig::bg_history_length},
      {"bg_k_neighbours", &EngineConfig::bg_k_neighbours},
      {"bg_distance_threshold", &EngineConfig::bg_distance_threshold},
      {"bg_update_stride", &EngineConfig::bg_update_stride},
      {"min_blob_area_px", &EngineConfig::min_blob_area_px},
  };
  return defs;
}

}  // namespace

ValidatedConfig validate_config(const EngineConfig& cfg) {
  std::vector<std::string> issues;
  auto positive = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) issues.push_back(fmt::format("{} must be > 0", name));
  };
  positive("flower_update_interval_frames", cfg.flower_update_interval_frames);
  positive("visit_dwell_frames", cfg.visit_dwell_frames);
  positive("false_positive_track_length_px", cfg.false_positive_track_length_px);
  positive("min_track_frames", cfg.min_track_frames);
  positive("fertilisation_threshold", cfg.fertilisation_threshold);
  positive("association_gate_px", cfg.association_gate_px);
  positive("track_timeout_frames", cfg.track_timeout_frames);
  positive("flower_gate_px", cfg.flower_gate_px);
  positive("bg_history_length", cfg.bg_history_length);
  positive("bg_k_neighbours", cfg.bg_k_neighbours);
  positive("bg_distance_threshold", cfg.bg_distance_threshold);
  positive("bg_update_stride", cfg.bg_update_stride);
  positive("min_blob_area_px", cfg.min_blob_area_px);
  if (!(cfg.flower_radius_margin_fraction >= 0.0) ||
      !std::isfinite(cfg.flower_radius_margin_fraction)) {
    issues.emplace_back("flower_radius_margin_fraction must be >= 0");
  }
  if (!(cfg.lowres_scale_factor >= 1.0) || !std::isfinite(cfg.lowres_scale_factor)) {
    issues.emplace_back("lowres_scale_factor must be >= 1");
  }
  if (cfg.bg_k_neighbours > cfg.bg_history_length) {
    issues.emplace_back("bg_k_neighbours must not exceed bg_history_length");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return ValidatedConfig(cfg);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : field_defs()) k.emplace_back(f.name);
    return k;
  }();
  return keys;
}

void apply_config_overrides(EngineConfig& cfg,
                            const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> issues;
  for (const auto& [key, raw] : overrides) {
    auto it = std::find_if(field_defs().begin(), field_defs().end(),
                           [&](const FieldDef& f) { return key == f.name; });
    if (it == field_defs().end()) {
      issues.push_back(fmt::format("unknown key '{}'", key));
      continue;
    }
    const std::string value(trim(raw));
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") {
              cfg.*member = true;
            } else if (value == "false" || value == "0") {
              cfg.*member = false;
            } else {
              issues.push_back(fmt::format("{}: expected true/false, got '{}'", key, value));
            }
          } else {
            T parsed{};
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
            if (ec != std::errc() || p != value.data() + value.size()) {
              issues.push_back(fmt::format("{}: cannot parse '{}'", key, value));
            } else {
              cfg.*member = parsed;
            }
          }
        },
        it->ptr);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

std::map<std::string, std::string> parse_key_value_text(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    auto key = trim(sv.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out[std::string(key)] = std::string(trim(sv.substr(eq + 1)));
  }
  return out;
}

ValidatedConfig load_config(const std::optional<std::string>& path,
                            const std::map<std::string, std::string>& cli_overrides) {
  EngineConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError({fmt::format("cannot open config file '{}'", *path)});
    apply_config_overrides(cfg, parse_key_value_text(in));
  }
  apply_config_overrides(cfg, cli_overrides);
  return validate_config(cfg);
}

std::string config_to_text(const EngineConfig& cfg) {
  std::string out;
  for (const auto& f : field_defs()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            out += fmt::format("{}={}\n", f.name, cfg.*member ? "true" : "false");
          } else {
            out += fmt::format("{}={}\n", f.name, cfg.*member);
          }
        },
        f.ptr);
  }
  return out;
}

}  // namespace pollitrack
