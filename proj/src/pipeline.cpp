#include "pollitrack/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "pollitrack/dataset_io.hpp"
#include "pollitrack/errors.hpp"

namespace fs = std::filesystem;

namespace pollitrack {

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::istream& in, const fs::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](std::string_view p) -> std::optional<fs::path> {
    if (p.empty()) return std::nullopt;
    fs::path path{std::string(p)};
    return path.is_absolute() ? path : base_dir / path;
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto comma = sv.find(',', start);
      fields.push_back(trim(sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 5 || fields.size() > 6) {
      throw ParseError(fmt::format("manifest needs 5 or 6 fields, found {}", fields.size()), line_no);
    }
    ManifestEntry e;
    e.video_id = std::string(fields[0]);
    if (e.video_id.empty()) throw ParseError("empty video_id", line_no);
    int camera = 0;
    auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), camera);
    if (ec != std::errc() || p != fields[1].data() + fields[1].size() || camera < 1 || camera > 9) {
      throw ParseError(fmt::format("camera must be 1..9, got '{}'", fields[1]), line_no);
    }
    e.meta.camera_number = camera;
    auto date = parse_date(fields[2]);
    if (!date) throw ParseError(fmt::format("bad date '{}'", fields[2]), line_no);
    e.meta.record_date = *date;
    auto time = parse_time_of_day(fields[3]);
    if (!time) throw ParseError(fmt::format("bad start time '{}'", fields[3]), line_no);
    e.meta.record_start_time = *time;
    e.detections_path = resolve(fields[4]);
    if (fields.size() == 6) e.frames_path = resolve(fields[5]);
    if (!e.detections_path && !e.frames_path) {
      throw ParseError(fmt::format("video '{}' has no input", e.video_id), line_no);
    }
    if (std::any_of(entries.begin(), entries.end(), [&](const auto& x) { return x.video_id == e.video_id; })) {
      throw ParseError(fmt::format("duplicate video_id '{}'", e.video_id), line_no);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open manifest '{}'", path.string()), 0);
  return parse_manifest(in, path.parent_path());
}

std::string manifest_line(const ManifestEntry& e) {
  std::string line = fmt::format("{},{},{},{},{}", e.video_id, e.meta.camera_number,
                                 format_date(e.meta.record_date),
                                 format_time_of_day(e.meta.record_start_time),
                                 e.detections_path ? e.detections_path->string() : "");
  if (e.frames_path) line += "," + e.frames_path->string();
  return line;
}

// ---------------------------------------------------------------------------
// Per-video engine

namespace {

class VideoEngine {
 public:
  VideoEngine(std::string video_id, VideoMeta meta, const ValidatedConfig& cfg)
      : cfg_(cfg.get()),
        tracker_(cfg, meta),
        flowers_(cfg),
        visits_(cfg->visit_dwell_frames),
        full_model_(background_params(cfg_)),
        lowres_model_(background_params(cfg_)) {
    result_.video_id = std::move(video_id);
    result_.meta = meta;
    result_.config = cfg_;
  }

  void process(std::int64_t frame, const GrayImage* image, DeepDetectionReader* deep) {
    auto& stats = result_.stats;
    ++stats.frames;
    const bool epoch = deep != nullptr && flowers_.is_epoch(frame);
    const int live = tracker_.live_track_count();

    ProcessingMode mode = ProcessingMode::Full;
    std::vector<Detection> blobs;
    if (image) {
      if (cfg_.lowres_enabled) {
        const double f = cfg_.lowres_scale_factor;
        const auto mask = lowres_model_.update(downscale(*image, f), frame);
        if (live == 0) {
          const int min_area = std::max(1, static_cast<int>(std::floor(cfg_.min_blob_area_px / (f * f))));
          mode = select_processing_mode(live, !extract_blobs(mask, min_area, f).empty());
        }
      }
      if (mode == ProcessingMode::Full) {
        blobs = extract_blobs(full_model_.update(*image, frame), cfg_.min_blob_area_px);
      }
    }

    DetectionBatch batch;
    batch.frame_index = frame;
    batch.mode = mode;
    batch.foreground_region_count = static_cast<int>(blobs.size());
    std::vector<Detection> deep_dets;
    bool used_deep = false;
    if (mode == ProcessingMode::LowRes) {
      ++stats.lowres_frames;
      if (epoch) {
        deep_dets = deep->detections_for(frame);
        used_deep = true;
      }
    } else {
      ++stats.full_frames;
      const auto choice = arbitrate({image != nullptr, deep != nullptr, live, batch.foreground_region_count, epoch});
      if (choice == DetectionSourceChoice::DeepDetector) {
        deep_dets = deep->detections_for(frame);
        batch.detections = deep_dets;
        used_deep = true;
        ++stats.deep_frames;
      } else {
        batch.detections = std::move(blobs);
        ++stats.segmentation_frames;
      }
    }
    if (epoch && used_deep) {
      std::vector<Detection> flower_dets;
      for (const auto& d : deep_dets) {
        if (d.species == Species::Flower) flower_dets.push_back(d);
      }
      flowers_.update(flower_dets, frame);
    }

    for (const auto& e : tracker_.step(batch)) {
      if (e.kind == TrackEventKind::Created) {
        result_.point_flower_ids.emplace_back();
        log(e.track_id, frame, "created", e.center);
      } else {
        close_visits(e.track_id);
        log(e.track_id, e.frame_index, "closed", tracker_.track(e.track_id).points.back().position);
      }
    }
    for (int id : tracker_.live_track_ids()) {
      auto& t = tracker_.track(id);
      const auto& last = t.points.back();
      auto& flower_ids = result_.point_flower_ids[static_cast<std::size_t>(id)];
      flower_ids.resize(t.points.size());
      if (last.frame_index != frame || last.source == PointSource::Interpolated) continue;
      auto boundary = visits_.update(id, t.track_code.str(), t.species, last.position, frame,
                                     flowers_.flowers());
      flower_ids.back() = visits_.current_flower(id).value_or("");
      if (boundary) on_boundary(*boundary);
    }
  }

  VideoResult finish() {
    for (const auto& e : tracker_.close_all()) {
      close_visits(e.track_id);
      log(e.track_id, e.frame_index, "closed", tracker_.track(e.track_id).points.back().position);
    }
    result_.tracks = tracker_.tracks();
    result_.visits = visits_.visits();
    result_.flowers = flowers_.flowers();
    std::map<std::string, int> seen;
    for (const auto& t : result_.tracks) {
      result_.verdicts.push_back(finalize_track(t, cfg_));
      const int n = ++seen[t.track_code.str()];
      result_.track_keys.push_back(n == 1 ? t.track_code.str() : fmt::format("{}-{}", t.track_code.str(), n));
    }
    for (auto& e : result_.events) {
      if (e.event == "closed" && !result_.accepted(static_cast<std::size_t>(e.track_id))) e.event = "culled";
    }
    return std::move(result_);
  }

 private:
  void log(int track_id, std::int64_t frame, std::string event, Point p, std::string flower = {}) {
    result_.events.push_back({track_id, frame, std::move(event), p, std::move(flower)});
  }

  Point position_at(int track_id, std::int64_t frame) const {
    const auto& pts = tracker_.track(track_id).points;
    auto it = std::lower_bound(pts.begin(), pts.end(), frame,
                               [](const TrackPoint& p, std::int64_t f) { return p.frame_index < f; });
    return it == pts.end() ? pts.back().position : it->position;
  }

  void on_boundary(const VisitBoundary& b) {
    const auto& v = b.event;
    if (b.kind == VisitBoundaryKind::Opened) {
      log(v.track_id, v.entry_frame, "visit_start", position_at(v.track_id, v.entry_frame), v.flower_id);
    } else {
      tracker_.track(v.track_id).visits.push_back(visits_.visits().size() - 1);
      log(v.track_id, v.exit_frame, "visit_end", position_at(v.track_id, v.exit_frame), v.flower_id);
    }
  }

  void close_visits(int track_id) {
    if (auto b = visits_.close_track(track_id)) on_boundary(*b);
  }

  EngineConfig cfg_;
  InsectTracker tracker_;
  FlowerTracker flowers_;
  VisitDetector visits_;
  BackgroundModel full_model_;
  BackgroundModel lowres_model_;
  VideoResult result_;
};

}  // namespace

VideoResult run_video_streams(const std::string& video_id, const VideoMeta& meta,
                              const ValidatedConfig& cfg, FrameSource* frames,
                              DeepDetectionReader* deep) {
  if (!frames && !deep) throw std::invalid_argument("run_video_streams needs at least one input");
  VideoMeta m = meta;
  if (frames) {
    m.frame_width = frames->width();
    m.frame_height = frames->height();
  }
  validate_meta(m);
  VideoEngine engine(video_id, m, cfg);
  if (frames) {
    std::int64_t f = 0;
    while (auto image = frames->next()) engine.process(f++, &*image, deep);
  } else {
    for (std::int64_t f = 0;; ++f) {
      engine.process(f, nullptr, deep);
      if (deep->exhausted()) break;
    }
  }
  return engine.finish();
}

VideoRunStatus run_video(const ManifestEntry& entry, const ValidatedConfig& cfg, const fs::path& out_dir) {
  VideoRunStatus status{entry.video_id, false, {}};
  try {
    VideoMeta meta = entry.meta;
    std::unique_ptr<FrameSource> frames;
    if (entry.frames_path) {
      frames = open_frame_source(*entry.frames_path);
      meta.frame_width = frames->width();
      meta.frame_height = frames->height();
    }
    std::unique_ptr<DeepDetectionReader> deep;
    if (entry.detections_path) {
      if (!fs::exists(*entry.detections_path)) {
        throw ParseError(fmt::format("cannot open '{}'", entry.detections_path->string()), 0);
      }
      deep = std::make_unique<DeepDetectionReader>(*entry.detections_path, meta.frame_width,
                                                   meta.frame_height, entry.video_id);
    }
    const VideoResult result = run_video_streams(entry.video_id, meta, cfg, frames.get(), deep.get());
    write_video_dataset(out_dir, result);
    status.ok = true;
  } catch (const std::exception& e) {
    status.error = e.what();
  }
  return status;
}

std::vector<VideoRunStatus> run_batch(const std::vector<ManifestEntry>& entries,
                                      const ValidatedConfig& cfg, const fs::path& out_dir,
                                      int workers) {
  std::vector<VideoRunStatus> results(entries.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) results[i] = run_video(entries[i], cfg, out_dir);
  };
  const auto n = static_cast<std::size_t>(std::clamp(workers, 1, std::max(1, static_cast<int>(entries.size()))));
  std::vector<std::jthread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(work);
  work();
  return results;
}

BenchResult bench(VectorFrameSource& frames, const VideoMeta& meta, const ValidatedConfig& cfg,
                  const std::optional<fs::path>& detections) {
  BenchResult out;
  out.frames = frames.frame_count();
  auto timed = [&](bool lowres, std::int64_t* lowres_frames) {
    EngineConfig c = cfg.get();
    c.lowres_enabled = lowres;
    const auto vc = validate_config(c);
    frames.rewind();
    std::unique_ptr<DeepDetectionReader> deep;
    if (detections) deep = std::make_unique<DeepDetectionReader>(*detections, frames.width(), frames.height());
    const auto start = std::chrono::steady_clock::now();
    const auto r = run_video_streams("bench", meta, vc, &frames, deep.get());
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    if (lowres_frames) *lowres_frames = r.stats.lowres_frames;
    return elapsed.count();
  };
  out.full_seconds = timed(false, nullptr);
  out.lowres_seconds = timed(true, &out.lowres_frames);
  frames.rewind();
  return out;
}

}  // namespace pollitrack
