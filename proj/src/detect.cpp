#include "pollitrack/detect.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

namespace pollitrack {

using nlohmann::json;

std::string_view mode_name(ProcessingMode m) noexcept {
  return m == ProcessingMode::Full ? "full" : "lowres";
}

std::size_t ForegroundMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BackgroundParams background_params(const EngineConfig& cfg) {
  return {cfg.bg_history_length, cfg.bg_k_neighbours, cfg.bg_distance_threshold,
          cfg.bg_update_stride};
}

// ---------------------------------------------------------------------------
// Background model

BackgroundModel::BackgroundModel(BackgroundParams params) : params_(params) {
  if (params_.history_length < 1 || params_.k_neighbours < 1 ||
      params_.k_neighbours > params_.history_length || params_.distance_threshold < 0 ||
      params_.update_stride < 1) {
    throw ConfigError({"background model needs history_length >= K >= 1 and stride >= 1"});
  }
}

ForegroundMask BackgroundModel::update(const GrayImage& frame, std::int64_t frame_index) {
  const auto hist = static_cast<std::size_t>(params_.history_length);
  if (!initialised()) {
    width_ = frame.width();
    height_ = frame.height();
    samples_.resize(static_cast<std::size_t>(width_) * height_ * hist);
    auto px = frame.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      std::fill_n(samples_.begin() + static_cast<std::ptrdiff_t>(i * hist), hist, px[i]);
    }
  } else if (frame.width() != width_ || frame.height() != height_) {
    throw StreamError(fmt::format("frame {} is {}x{}, expected {}x{}", frame_index, frame.width(),
                                  frame.height(), width_, height_));
  }

  ForegroundMask mask{frame_index, width_, height_,
                      std::vector<std::uint8_t>(static_cast<std::size_t>(width_) * height_, 0)};
  const auto px = frame.pixels();
  const int k = params_.k_neighbours;
  const int thr = params_.distance_threshold;
  const std::uint8_t* s = samples_.data();
  for (std::size_t i = 0; i < px.size(); ++i, s += hist) {
    const int v = px[i];
    int matches = 0;
    for (std::size_t j = 0; j < hist && matches < k; ++j) {
      if (std::abs(v - static_cast<int>(s[j])) <= thr) ++matches;
    }
    mask.bits[i] = matches < k ? 1 : 0;
  }

  if (frames_seen_ % params_.update_stride == 0) {
    std::uint8_t* slot = samples_.data() + next_slot_;
    for (std::size_t i = 0; i < px.size(); ++i, slot += hist) *slot = px[i];
    next_slot_ = (next_slot_ + 1) % params_.history_length;
  }
  ++frames_seen_;
  return mask;
}

// ---------------------------------------------------------------------------
// Blob extraction

std::vector<Detection> extract_blobs(const ForegroundMask& mask, int min_area_px, double scale) {
  if (min_area_px <= 0) throw std::invalid_argument("min_area_px must be > 0");
  std::vector<Detection> out;
  const int w = mask.width, h = mask.height;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<int> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const auto idx0 = static_cast<std::size_t>(y0) * w + x0;
      if (!mask.bits[idx0] || seen[idx0]) continue;
      seen[idx0] = 1;
      stack.assign(1, static_cast<int>(idx0));
      long long area = 0;
      double sx = 0.0, sy = 0.0;
      int minx = x0, maxx = x0, miny = y0, maxy = y0;
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w, y = idx / w;
        ++area;
        sx += x;
        sy += y;
        minx = std::min(minx, x), maxx = std::max(maxx, x);
        miny = std::min(miny, y), maxy = std::max(maxy, y);
        for (int dy = -1; dy <= 1; ++dy) {
          const int ny = y + dy;
          if (ny < 0 || ny >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            if ((dx == 0 && dy == 0) || nx < 0 || nx >= w) continue;
            const auto n = static_cast<std::size_t>(ny) * w + nx;
            if (mask.bits[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      if (area < min_area_px) continue;
      Detection d;
      d.frame_index = mask.frame_index;
      d.species = Species::Unknown;
      d.source = DetectionSource::Segmentation;
      d.confidence = 1.0;
      // pixel (x, y) covers [x, x+1) x [y, y+1); its centre is at +0.5
      d.center = {(sx / static_cast<double>(area) + 0.5) * scale,
                  (sy / static_cast<double>(area) + 0.5) * scale};
      d.extent = {(maxx - minx + 1) * scale, (maxy - miny + 1) * scale};
      out.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deep-detector JSONL

Detection parse_detection_record(const std::string& line, std::size_t line_no, int frame_width,
                                 int frame_height, std::string* video_id_out) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed JSON: {}", e.what()), line_no);
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);

  auto number = [&](const char* key) -> double {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
      throw ParseError(fmt::format("missing or non-numeric field '{}'", key), line_no);
    }
    return it->get<double>();
  };

  Detection d;
  auto fit = j.find("frame");
  if (fit == j.end() || !fit->is_number_integer() || fit->get<std::int64_t>() < 0) {
    throw ParseError("field 'frame' must be a non-negative integer", line_no);
  }
  d.frame_index = fit->get<std::int64_t>();
  auto cit = j.find("class");
  if (cit == j.end() || !cit->is_string()) throw ParseError("missing field 'class'", line_no);
  auto sp = parse_species(cit->get<std::string>());
  if (!sp || *sp == Species::Unknown) {
    throw ParseError(fmt::format("unknown class '{}'", cit->get<std::string>()), line_no);
  }
  d.species = *sp;
  d.center = {number("cx"), number("cy")};
  d.extent = {number("w"), number("h")};
  d.confidence = number("conf");
  d.source = DetectionSource::DeepDetector;
  if (auto reason = check_detection(d, frame_width, frame_height)) throw ParseError(*reason, line_no);

  if (video_id_out) {
    auto vit = j.find("video_id");
    *video_id_out = (vit != j.end() && vit->is_string()) ? vit->get<std::string>() : std::string{};
  }
  return d;
}

std::string detection_to_json(const Detection& d, const std::string& video_id,
                              std::optional<int> true_track_id) {
  json j;
  j["video_id"] = video_id;
  j["frame"] = d.frame_index;
  j["class"] = std::string(species_name(d.species));
  j["cx"] = d.center.x;
  j["cy"] = d.center.y;
  j["w"] = d.extent.w;
  j["h"] = d.extent.h;
  j["conf"] = d.confidence;
  if (true_track_id) j["true_track_id"] = *true_track_id;
  return j.dump();
}

DeepDetectionReader::DeepDetectionReader(std::istream& in, int frame_width, int frame_height,
                                         std::optional<std::string> video_id)
    : in_(&in), frame_width_(frame_width), frame_height_(frame_height),
      video_id_(std::move(video_id)) {}

DeepDetectionReader::DeepDetectionReader(const std::filesystem::path& path, int frame_width,
                                         int frame_height, std::optional<std::string> video_id)
    : owned_(path), in_(&owned_), frame_width_(frame_width), frame_height_(frame_height),
      video_id_(std::move(video_id)) {
  if (!owned_) throw StreamError(fmt::format("cannot open detections '{}'", path.string()));
}

std::optional<Detection> DeepDetectionReader::read_record() {
  std::string line;
  while (!eof_) {
    if (!std::getline(*in_, line)) {
      eof_ = true;
      break;
    }
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string vid;
    Detection d = parse_detection_record(line, line_no_, frame_width_, frame_height_, &vid);
    if (video_id_ && !vid.empty() && vid != *video_id_) continue;
    if (d.frame_index < last_record_frame_) {
      throw StreamError(fmt::format("line {}: frame {} after frame {}", line_no_, d.frame_index,
                                    last_record_frame_));
    }
    last_record_frame_ = d.frame_index;
    return d;
  }
  return std::nullopt;
}

std::vector<Detection> DeepDetectionReader::detections_for(std::int64_t frame_index) {
  if (frame_index <= last_requested_) {
    throw StreamError(fmt::format("frame {} requested after frame {}", frame_index,
                                  last_requested_));
  }
  last_requested_ = frame_index;
  std::vector<Detection> out;
  while (true) {
    if (!pending_) pending_ = read_record();
    if (!pending_ || pending_->frame_index > frame_index) break;
    if (pending_->frame_index == frame_index) out.push_back(*pending_);
    pending_.reset();
  }
  return out;
}

// ---------------------------------------------------------------------------

DetectionSourceChoice arbitrate(const ArbitrationInput& in) noexcept {
  if (!in.segmentation_available) return DetectionSourceChoice::DeepDetector;
  if (!in.deep_available) return DetectionSourceChoice::Segmentation;
  if (in.flower_epoch_due) return DetectionSourceChoice::DeepDetector;
  if (in.active_track_count > 0 && in.fg_region_count == in.active_track_count) {
    return DetectionSourceChoice::Segmentation;
  }
  return DetectionSourceChoice::DeepDetector;
}

}  // namespace pollitrack
