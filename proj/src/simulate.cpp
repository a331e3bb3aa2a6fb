#include "pollitrack/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>

#include "pollitrack/detect.hpp"
#include "pollitrack/errors.hpp"
#include "pollitrack/rng.hpp"

namespace pollitrack {

namespace {

constexpr std::uint64_t kFlowerStream = 1;
constexpr std::uint64_t kInsectStream = 2;
constexpr std::uint64_t kFlowerNoiseStream = 3;
constexpr std::uint64_t kInsectNoiseStream = 4;
constexpr std::uint64_t kFalsePositiveStream = 5;

double quantise(double v) { return std::round(v * 100.0) / 100.0; }

Point quantise(Point p) { return {quantise(p.x), quantise(p.y)}; }

bool in_frame(Point p, const SceneConfig& cfg) {
  return p.x >= 0.0 && p.x < cfg.frame_width && p.y >= 0.0 && p.y < cfg.frame_height;
}

Point clamp_to_frame(Point p, const SceneConfig& cfg) {
  return {std::clamp(p.x, 0.0, cfg.frame_width - 0.01), std::clamp(p.y, 0.0, cfg.frame_height - 0.01)};
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && p == text.data() + text.size();
}

struct SceneField {
  std::function<bool(SceneConfig&, const std::string&)> set;
  std::function<std::string(const SceneConfig&)> get;
};

template <typename T>
SceneField number_field(T SceneConfig::*member) {
  return {[member](SceneConfig& c, const std::string& v) { return parse_number(v, c.*member); },
          [member](const SceneConfig& c) { return fmt::format("{}", c.*member); }};
}

template <typename T>
SceneField motion_field(T MotionModel::*member) {
  return {[member](SceneConfig& c, const std::string& v) { return parse_number(v, c.motion.*member); },
          [member](const SceneConfig& c) { return fmt::format("{}", c.motion.*member); }};
}

SceneField noise_field(double NoiseModel::*member) {
  return {[member](SceneConfig& c, const std::string& v) { return parse_number(v, c.noise.*member); },
          [member](const SceneConfig& c) { return fmt::format("{}", c.noise.*member); }};
}

SceneField count_field(Species s) {
  return {[s](SceneConfig& c, const std::string& v) {
            int n = 0;
            if (!parse_number(v, n)) return false;
            c.insect_counts[s] = n;
            return true;
          },
          [s](const SceneConfig& c) {
            auto it = c.insect_counts.find(s);
            return fmt::format("{}", it == c.insect_counts.end() ? 0 : it->second);
          }};
}

const std::vector<std::pair<std::string, SceneField>>& scene_fields() {
  static const std::vector<std::pair<std::string, SceneField>> fields = {
      {"seed", number_field(&SceneConfig::seed)},
      {"frames", number_field(&SceneConfig::frame_count)},
      {"width", number_field(&SceneConfig::frame_width)},
      {"height", number_field(&SceneConfig::frame_height)},
      {"fps", number_field(&SceneConfig::fps)},
      {"camera", number_field(&SceneConfig::camera_number)},
      {"date",
       {[](SceneConfig& c, const std::string& v) {
          auto d = parse_date(v);
          if (d) c.record_date = *d;
          return d.has_value();
        },
        [](const SceneConfig& c) { return format_date(c.record_date); }}},
      {"start_time",
       {[](SceneConfig& c, const std::string& v) {
          auto t = parse_time_of_day(v);
          if (t) c.record_start_time = *t;
          return t.has_value();
        },
        [](const SceneConfig& c) { return format_time_of_day(c.record_start_time); }}},
      {"flowers", number_field(&SceneConfig::flower_count)},
      {"flower_size_min_px", number_field(&SceneConfig::flower_size_min_px)},
      {"flower_size_max_px", number_field(&SceneConfig::flower_size_max_px)},
      {"flower_border_px", number_field(&SceneConfig::flower_border_px)},
      {"flower_min_gap_px", number_field(&SceneConfig::flower_min_gap_px)},
      {"flower_update_interval_frames", number_field(&SceneConfig::flower_update_interval_frames)},
      {"flower_drift_px", number_field(&SceneConfig::flower_drift_px)},
      {"honeybee", count_field(Species::Honeybee)},
      {"syrphidae", count_field(Species::Syrphidae)},
      {"lepidoptera", count_field(Species::Lepidoptera)},
      {"vespidae", count_field(Species::Vespidae)},
      {"min_separation_px", number_field(&SceneConfig::min_separation_px)},
      {"quiet_frames", number_field(&SceneConfig::quiet_frames)},
      {"speed_min_px", motion_field(&MotionModel::speed_min_px)},
      {"speed_max_px", motion_field(&MotionModel::speed_max_px)},
      {"turn_sigma_rad", motion_field(&MotionModel::turn_sigma_rad)},
      {"attraction_probability", motion_field(&MotionModel::attraction_probability)},
      {"dwell_min_frames", motion_field(&MotionModel::dwell_min_frames)},
      {"dwell_max_frames", motion_field(&MotionModel::dwell_max_frames)},
      {"dwell_wiggle_px", motion_field(&MotionModel::dwell_wiggle_px)},
      {"cooldown_frames", motion_field(&MotionModel::cooldown_frames)},
      {"max_lifetime_frames", motion_field(&MotionModel::max_lifetime_frames)},
      {"miss_rate", noise_field(&NoiseModel::miss_rate)},
      {"false_positive_rate", noise_field(&NoiseModel::false_positive_rate)},
      {"jitter_sigma_px", noise_field(&NoiseModel::jitter_sigma_px)},
      {"flower_miss_rate", noise_field(&NoiseModel::flower_miss_rate)},
      {"visit_dwell_frames", number_field(&SceneConfig::visit_dwell_frames)},
      {"flower_radius_margin_fraction", number_field(&SceneConfig::flower_radius_margin_fraction)},
  };
  return fields;
}

}  // namespace

Extent default_body_size(Species s) {
  switch (s) {
    case Species::Honeybee: return {20.0, 14.0};
    case Species::Syrphidae: return {10.0, 6.0};
    case Species::Lepidoptera: return {26.0, 20.0};
    case Species::Vespidae: return {22.0, 14.0};
    default: throw std::invalid_argument("default_body_size: not an insect species");
  }
}

void validate_scene(const SceneConfig& cfg) {
  std::vector<std::string> issues;
  auto probability = [&](const char* name, double p) {
    if (!(p >= 0.0 && p <= 1.0)) issues.push_back(fmt::format("{} must be in [0, 1]", name));
  };
  auto non_negative = [&](const char* name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) issues.push_back(fmt::format("{} must be >= 0", name));
  };
  if (cfg.frame_count <= 0) issues.emplace_back("frames must be > 0");
  if (cfg.frame_width <= 0 || cfg.frame_height <= 0) issues.emplace_back("frame size must be > 0");
  if (!(cfg.fps > 0.0)) issues.emplace_back("fps must be > 0");
  if (cfg.camera_number < 1 || cfg.camera_number > 9) issues.emplace_back("camera must be 1..9");
  if (!cfg.record_date.ok()) issues.emplace_back("date is not a valid calendar date");
  if (cfg.flower_count < 0) issues.emplace_back("flowers must be >= 0");
  if (!(cfg.flower_size_min_px > 0.0) || cfg.flower_size_max_px < cfg.flower_size_min_px) {
    issues.emplace_back("flower sizes need 0 < min <= max");
  }
  non_negative("flower_border_px", cfg.flower_border_px);
  non_negative("flower_min_gap_px", cfg.flower_min_gap_px);
  non_negative("flower_drift_px", cfg.flower_drift_px);
  if (cfg.flower_update_interval_frames < 1) issues.emplace_back("flower_update_interval_frames must be >= 1");
  for (const auto& [s, n] : cfg.insect_counts) {
    if (!is_insect(s)) issues.emplace_back("insect counts may only name insect species");
    if (n < 0) issues.push_back(fmt::format("{} count must be >= 0", species_name(s)));
  }
  for (const auto& [s, e] : cfg.body_sizes) {
    if (!(e.w > 0.0 && e.h > 0.0)) issues.push_back(fmt::format("{} body size must be > 0", species_name(s)));
  }
  non_negative("min_separation_px", cfg.min_separation_px);
  if (cfg.quiet_frames < 0) issues.emplace_back("quiet_frames must be >= 0");
  const auto& m = cfg.motion;
  non_negative("speed_min_px", m.speed_min_px);
  non_negative("speed_max_px", m.speed_max_px);
  if (m.speed_max_px < m.speed_min_px) issues.emplace_back("speed_max_px must be >= speed_min_px");
  non_negative("turn_sigma_rad", m.turn_sigma_rad);
  probability("attraction_probability", m.attraction_probability);
  if (m.dwell_min_frames < 1 || m.dwell_max_frames < m.dwell_min_frames) {
    issues.emplace_back("dwell frames need 1 <= min <= max");
  }
  non_negative("dwell_wiggle_px", m.dwell_wiggle_px);
  if (m.cooldown_frames < 0) issues.emplace_back("cooldown_frames must be >= 0");
  if (m.max_lifetime_frames < 1) issues.emplace_back("max_lifetime_frames must be >= 1");
  probability("miss_rate", cfg.noise.miss_rate);
  probability("flower_miss_rate", cfg.noise.flower_miss_rate);
  non_negative("false_positive_rate", cfg.noise.false_positive_rate);
  non_negative("jitter_sigma_px", cfg.noise.jitter_sigma_px);
  if (cfg.visit_dwell_frames < 1) issues.emplace_back("visit_dwell_frames must be >= 1");
  non_negative("flower_radius_margin_fraction", cfg.flower_radius_margin_fraction);
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

SceneConfig parse_scene_config(const std::map<std::string, std::string>& values) {
  SceneConfig cfg;
  std::vector<std::string> issues;
  const auto& fields = scene_fields();
  for (const auto& [key, value] : values) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) {
      issues.push_back(fmt::format("unknown scene key '{}'", key));
    } else if (!it->second.set(cfg, value)) {
      issues.push_back(fmt::format("{}: cannot parse '{}'", key, value));
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  validate_scene(cfg);
  return cfg;
}

std::string scene_config_to_text(const SceneConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : scene_fields()) out += fmt::format("{}={}\n", key, field.get(cfg));
  return out;
}

VideoMeta scene_meta(const SceneConfig& cfg) {
  VideoMeta meta;
  meta.camera_number = cfg.camera_number;
  meta.record_date = cfg.record_date;
  meta.record_start_time = cfg.record_start_time;
  meta.fps = cfg.fps;
  meta.frame_width = cfg.frame_width;
  meta.frame_height = cfg.frame_height;
  return meta;
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

std::vector<TrueFlower> place_flowers(const SceneConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kFlowerStream, 0));
  const double x_lo = cfg.flower_border_px, x_hi = cfg.frame_width - cfg.flower_border_px;
  const double y_lo = cfg.flower_border_px, y_hi = cfg.frame_height - cfg.flower_border_px;
  if (cfg.flower_count > 0 && (x_hi < x_lo || y_hi < y_lo)) {
    throw GenerationError("flower border leaves no room for flowers");
  }
  std::vector<TrueFlower> flowers;
  for (int i = 0; i < cfg.flower_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double s = rng.uniform(cfg.flower_size_min_px, cfg.flower_size_max_px);
      const Extent e{quantise(s), quantise(s * rng.uniform(0.8, 1.0))};
      const double r = flower_radius(e, cfg.flower_radius_margin_fraction);
      const Point c = quantise(Point{rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)});
      const bool clear = std::all_of(flowers.begin(), flowers.end(), [&](const TrueFlower& f) {
        return distance(c, f.epochs.front().center) >= r + f.radius + cfg.flower_min_gap_px;
      });
      if (!clear) continue;
      flowers.push_back({fmt::format("F{}", i), e, r, {{0, c, r, true}}});
      placed = true;
    }
    if (!placed) {
      throw GenerationError(fmt::format("cannot place flower {} of {} without overlap", i + 1,
                                        cfg.flower_count));
    }
  }
  for (std::int64_t epoch = cfg.flower_update_interval_frames; epoch < cfg.frame_count;
       epoch += cfg.flower_update_interval_frames) {
    for (auto& f : flowers) {
      Point c = f.epochs.back().center;
      if (cfg.flower_drift_px > 0.0) {
        c.x = std::clamp(c.x + cfg.flower_drift_px * rng.normal(), x_lo, x_hi);
        c.y = std::clamp(c.y + cfg.flower_drift_px * rng.normal(), y_lo, y_hi);
      }
      f.epochs.push_back({epoch, quantise(c), f.radius, true});
    }
  }
  return flowers;
}

const FlowerEpoch& epoch_at(const TrueFlower& f, std::int64_t frame) {
  auto it = std::upper_bound(f.epochs.begin(), f.epochs.end(), frame,
                             [](std::int64_t t, const FlowerEpoch& e) { return t < e.frame_index; });
  return *std::prev(it);
}

enum class Behaviour { Wandering, Approaching, Dwelling, Departing };

std::vector<TruePosition> walk(Rng& rng, const SceneConfig& cfg,
                               const std::vector<TrueFlower>& flowers) {
  const auto& m = cfg.motion;
  const double W = cfg.frame_width, H = cfg.frame_height;
  const std::int64_t start = rng.uniform_int(0, cfg.frame_count - 1);
  const auto edge = rng.uniform_int(0, 3);
  const double along = rng.uniform();
  const double spread = rng.uniform(-std::numbers::pi / 3, std::numbers::pi / 3);
  Point p;
  double heading = 0.0;
  switch (edge) {
    case 0: p = {0.0, along * H}; heading = 0.0; break;
    case 1: p = {W - 0.01, along * H}; heading = std::numbers::pi; break;
    case 2: p = {along * W, 0.0}; heading = std::numbers::pi / 2; break;
    default: p = {along * W, H - 0.01}; heading = -std::numbers::pi / 2; break;
  }
  heading += spread;
  const double speed = rng.uniform(m.speed_min_px, m.speed_max_px);

  Behaviour state = Behaviour::Wandering;
  int cooldown = 0;
  int dwell_left = 0;
  Point target, anchor;
  std::vector<TruePosition> out;
  for (std::int64_t t = start; t < cfg.frame_count; ++t) {
    const Point q = quantise(p);
    if (!in_frame(q, cfg)) break;
    out.push_back({t, q});

    if (state == Behaviour::Wandering && t - start >= m.max_lifetime_frames) {
      const double to_left = p.x, to_right = W - p.x, to_top = p.y, to_bottom = H - p.y;
      const double nearest = std::min({to_left, to_right, to_top, to_bottom});
      heading = nearest == to_left    ? std::numbers::pi
                : nearest == to_right ? 0.0
                : nearest == to_top   ? -std::numbers::pi / 2
                                      : std::numbers::pi / 2;
      state = Behaviour::Departing;
    }
    switch (state) {
      case Behaviour::Wandering:
        if (cooldown > 0) --cooldown;
        if (speed > 0.0 && cooldown == 0 && !flowers.empty() &&
            rng.bernoulli(m.attraction_probability)) {
          const auto& f = flowers[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<std::int64_t>(flowers.size()) - 1))];
          const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
          const double r = 0.3 * f.radius * std::sqrt(rng.uniform());
          const Point c = epoch_at(f, t).center;
          target = {c.x + r * std::cos(a), c.y + r * std::sin(a)};
          state = Behaviour::Approaching;
        } else {
          heading += m.turn_sigma_rad * rng.normal();
          p = {p.x + speed * std::cos(heading), p.y + speed * std::sin(heading)};
          break;
        }
        [[fallthrough]];
      case Behaviour::Approaching: {
        const double dx = target.x - p.x, dy = target.y - p.y;
        const double d = std::hypot(dx, dy);
        if (d <= speed) {
          p = anchor = target;
          dwell_left = static_cast<int>(rng.uniform_int(m.dwell_min_frames, m.dwell_max_frames)) - 1;
          state = Behaviour::Dwelling;
        } else {
          p = {p.x + speed * dx / d, p.y + speed * dy / d};
        }
        break;
      }
      case Behaviour::Dwelling:
        if (dwell_left > 0) {
          --dwell_left;
          p = {anchor.x + rng.uniform(-m.dwell_wiggle_px, m.dwell_wiggle_px),
               anchor.y + rng.uniform(-m.dwell_wiggle_px, m.dwell_wiggle_px)};
        } else {
          heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
          cooldown = m.cooldown_frames;
          state = Behaviour::Wandering;
          p = {p.x + speed * std::cos(heading), p.y + speed * std::sin(heading)};
        }
        break;
      case Behaviour::Departing:
        p = {p.x + speed * std::cos(heading), p.y + speed * std::sin(heading)};
        break;
    }
  }
  return out;
}

bool compatible(const std::vector<TruePosition>& path, const std::vector<TrueInsect>& others,
                const SceneConfig& cfg) {
  if (path.empty()) return true;
  const auto first = path.front().frame_index, last = path.back().frame_index;
  for (const auto& o : others) {
    if (o.positions.empty()) continue;
    const auto ofirst = o.positions.front().frame_index, olast = o.positions.back().frame_index;
    if (cfg.quiet_frames > 0) {
      if (first > olast && first <= olast + cfg.quiet_frames) return false;
      if (ofirst > last && ofirst <= last + cfg.quiet_frames) return false;
    }
    if (cfg.min_separation_px > 0.0) {
      const auto lo = std::max(first, ofirst), hi = std::min(last, olast);
      for (auto t = lo; t <= hi; ++t) {
        const auto& a = path[static_cast<std::size_t>(t - first)].center;
        const auto& b = o.positions[static_cast<std::size_t>(t - ofirst)].center;
        if (distance(a, b) < cfg.min_separation_px) return false;
      }
    }
  }
  return true;
}

}  // namespace

GroundTruth generate_scene(const SceneConfig& cfg) {
  validate_scene(cfg);
  GroundTruth truth;
  truth.config = cfg;
  truth.flowers = place_flowers(cfg);

  int next_id = 1;
  for (Species s : kInsectSpecies) {
    auto count = cfg.insect_counts.find(s);
    if (count == cfg.insect_counts.end()) continue;
    auto size = cfg.body_sizes.find(s);
    const Extent extent = size == cfg.body_sizes.end() ? default_body_size(s) : size->second;
    for (int k = 0; k < count->second; ++k, ++next_id) {
      Rng rng(derive_seed(cfg.seed, kInsectStream, static_cast<std::uint64_t>(next_id)));
      std::vector<TruePosition> path;
      bool ok = false;
      for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
        path = walk(rng, cfg, truth.flowers);
        ok = compatible(path, truth.insects, cfg);
      }
      if (!ok) {
        throw GenerationError(fmt::format("insect {} violates separation constraints after 500 draws",
                                          next_id));
      }
      truth.insects.push_back({next_id, s, extent, std::move(path)});
    }
  }
  truth.visits = replay_visits(truth);
  return truth;
}

std::vector<FlowerRecord> flowers_at(const GroundTruth& truth, std::int64_t frame_index) {
  std::vector<FlowerRecord> out;
  out.reserve(truth.flowers.size());
  for (const auto& f : truth.flowers) {
    const auto& e = epoch_at(f, frame_index);
    out.push_back({f.flower_id, e.center, e.radius, {}});
  }
  return out;
}

TrackCode true_track_code(const GroundTruth& truth, const TrueInsect& insect) {
  return make_track_code(scene_meta(truth.config), insect.positions.front().frame_index,
                         insect.species);
}

std::vector<VisitEvent> replay_visits(const GroundTruth& truth) {
  VisitDetector detector(truth.config.visit_dwell_frames);
  std::vector<std::vector<FlowerRecord>> by_epoch;
  std::vector<std::int64_t> epoch_frames;
  if (!truth.flowers.empty()) {
    for (const auto& e : truth.flowers.front().epochs) {
      epoch_frames.push_back(e.frame_index);
      by_epoch.push_back(flowers_at(truth, e.frame_index));
    }
  }
  static const std::vector<FlowerRecord> none;
  for (const auto& insect : truth.insects) {
    if (insect.positions.empty()) continue;
    const std::string code = true_track_code(truth, insect).str();
    for (const auto& pos : insect.positions) {
      const std::vector<FlowerRecord>* flowers = &none;
      if (!epoch_frames.empty()) {
        auto it = std::upper_bound(epoch_frames.begin(), epoch_frames.end(), pos.frame_index);
        flowers = &by_epoch[static_cast<std::size_t>(it - epoch_frames.begin()) - 1];
      }
      detector.update(insect.true_id, code, insect.species, pos.center, pos.frame_index, *flowers);
    }
    detector.close_track(insect.true_id);
  }
  return detector.visits();
}

std::vector<TruthTrack> truth_tracks(const GroundTruth& truth) {
  std::vector<TruthTrack> out;
  for (const auto& insect : truth.insects) {
    TruthTrack t{insect.true_id, insect.species, {}};
    for (const auto& p : insect.positions) t.bodies.push_back({p.frame_index, p.center, insect.extent});
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection stream

std::vector<EmittedDetection> emit_detections(const GroundTruth& truth, const NoiseModel& noise) {
  const auto& cfg = truth.config;
  std::vector<std::vector<EmittedDetection>> frames(static_cast<std::size_t>(cfg.frame_count));

  Rng flower_rng(derive_seed(cfg.seed, kFlowerNoiseStream, 0));
  if (!truth.flowers.empty()) {
    for (std::size_t e = 0; e < truth.flowers.front().epochs.size(); ++e) {
      for (const auto& f : truth.flowers) {
        const auto& ep = f.epochs[e];
        if (flower_rng.uniform() < noise.flower_miss_rate) continue;
        Detection d{ep.frame_index, Species::Flower, ep.center, f.extent, 0.95,
                    DetectionSource::DeepDetector};
        frames[static_cast<std::size_t>(ep.frame_index)].push_back({d, std::nullopt});
      }
    }
  }

  for (const auto& insect : truth.insects) {
    Rng rng(derive_seed(cfg.seed, kInsectNoiseStream, static_cast<std::uint64_t>(insect.true_id)));
    for (const auto& pos : insect.positions) {
      const double u = rng.uniform();
      const double nx = rng.normal();
      const double ny = rng.normal();
      if (u < noise.miss_rate) continue;
      Point c = pos.center;
      if (noise.jitter_sigma_px > 0.0) {
        c = clamp_to_frame(quantise(Point{c.x + noise.jitter_sigma_px * nx,
                                          c.y + noise.jitter_sigma_px * ny}),
                           cfg);
      }
      Detection d{pos.frame_index, insect.species, c, insect.extent, 0.9,
                  DetectionSource::DeepDetector};
      frames[static_cast<std::size_t>(pos.frame_index)].push_back({d, insect.true_id});
    }
  }

  if (noise.false_positive_rate > 0.0) {
    Rng rng(derive_seed(cfg.seed, kFalsePositiveStream, 0));
    const double whole = std::floor(noise.false_positive_rate);
    const double frac = noise.false_positive_rate - whole;
    for (std::int64_t t = 0; t < cfg.frame_count; ++t) {
      const int n = static_cast<int>(whole) + (rng.bernoulli(frac) ? 1 : 0);
      for (int k = 0; k < n; ++k) {
        const Species s = kInsectSpecies[static_cast<std::size_t>(rng.uniform_int(0, 3))];
        const Point c = clamp_to_frame(
            quantise(Point{rng.uniform(0.0, cfg.frame_width), rng.uniform(0.0, cfg.frame_height)}), cfg);
        Detection d{t, s, c, default_body_size(s), 0.5, DetectionSource::DeepDetector};
        frames[static_cast<std::size_t>(t)].push_back({d, std::nullopt});
      }
    }
  }

  std::vector<EmittedDetection> out;
  for (auto& f : frames) {
    for (auto& d : f) out.push_back(std::move(d));
  }
  return out;
}

void write_detections_jsonl(std::ostream& out, const std::vector<EmittedDetection>& dets,
                            const std::string& video_id) {
  for (const auto& d : dets) out << detection_to_json(d.detection, video_id, d.true_track_id) << '\n';
}

// ---------------------------------------------------------------------------
// Rasterizer

RasterFrameSource::RasterFrameSource(const GroundTruth& truth, RasterStyle style)
    : truth_(truth), style_(style) {}

std::optional<GrayImage> RasterFrameSource::next() {
  if (next_ >= frame_count()) return std::nullopt;
  return render(next_++);
}

GrayImage RasterFrameSource::render(std::int64_t frame_index) const {
  const int W = width(), H = height();
  GrayImage img(W, H, style_.background);
  auto span_of = [](double lo, double hi, int limit) {
    // pixels whose centre i + 0.5 lies in [lo, hi]
    const int a = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
    const int b = std::min(limit - 1, static_cast<int>(std::floor(hi - 0.5)));
    return std::pair{a, b};
  };
  for (const auto& f : truth_.flowers) {
    const Point c = epoch_at(f, frame_index).center;
    const double r = std::max(f.extent.w, f.extent.h) / 2.0;
    const auto [x0, x1] = span_of(c.x - r, c.x + r, W);
    const auto [y0, y1] = span_of(c.y - r, c.y + r, H);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
        if (dx * dx + dy * dy <= r * r) img.at(x, y) = style_.flower;
      }
    }
  }
  for (const auto& insect : truth_.insects) {
    if (insect.positions.empty()) continue;
    const auto first = insect.positions.front().frame_index;
    if (frame_index < first || frame_index > insect.positions.back().frame_index) continue;
    const Point c = insect.positions[static_cast<std::size_t>(frame_index - first)].center;
    const auto [x0, x1] = span_of(c.x - insect.extent.w / 2, c.x + insect.extent.w / 2, W);
    const auto [y0, y1] = span_of(c.y - insect.extent.h / 2, c.y + insect.extent.h / 2, H);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) img.at(x, y) = style_.insect;
    }
  }
  if (style_.illumination_step_frame && frame_index >= *style_.illumination_step_frame) {
    for (auto& px : img.pixels()) px = static_cast<std::uint8_t>(std::clamp(px + style_.illumination_step, 0, 255));
  }
  return img;
}

}  // namespace pollitrack
