#include "pollitrack/dataset_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <tuple>

#include "pollitrack/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pollitrack {

fs::path tracks_file(const fs::path& dir, const std::string& id) { return dir / (id + "_tracks.csv"); }
fs::path visits_file(const fs::path& dir, const std::string& id) { return dir / (id + "_visits.csv"); }
fs::path flowers_file(const fs::path& dir, const std::string& id) { return dir / (id + "_flowers.csv"); }
fs::path summary_file(const fs::path& dir, const std::string& id) { return dir / (id + "_summary.json"); }
fs::path truth_tracks_file(const fs::path& dir, const std::string& id) {
  return dir / (id + "_truth_tracks.csv");
}
fs::path truth_visits_file(const fs::path& dir, const std::string& id) {
  return dir / (id + "_truth_visits.csv");
}
fs::path truth_flowers_file(const fs::path& dir, const std::string& id) {
  return dir / (id + "_truth_flowers.csv");
}
fs::path truth_summary_file(const fs::path& dir, const std::string& id) {
  return dir / (id + "_truth_summary.json");
}

namespace {

constexpr const char* kTrackHeader = "track_code,species,frame,x,y,flower_id,event,track_key";
constexpr const char* kVisitHeader = "track_code,species,flower_id,entry_frame,exit_frame,kind,track_key";
constexpr const char* kFlowerHeader = "flower_id,epoch_frame,x,y,radius,detected";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

struct Row {
  int rank;  // orders rows that share a frame
  std::int64_t frame;
  std::string text;
};

int event_rank(const std::string& e) {
  if (e == "created") return 0;
  if (e == "visit_end") return 2;
  if (e == "visit_start") return 3;
  return 4;
}

std::string track_row(const std::string& code, Species s, std::int64_t frame, Point p,
                      const std::string& flower, const std::string& event, const std::string& key) {
  return fmt::format("{},{},{},{},{},{},{},{}", code, species_name(s), frame, p.x, p.y, flower, event, key);
}

// --- CSV reading -----------------------------------------------------------

class CsvTable {
 public:
  CsvTable(const fs::path& path, const std::vector<std::string>& required) : path_(path) {
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()), 0);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(fmt::format("'{}' is empty", path.string()), 1);
    auto header = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) columns_[header[i]] = i;
    for (const auto& r : required) {
      if (!columns_.count(r)) throw ParseError(fmt::format("'{}' lacks column '{}'", path.string(), r), 1);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != header.size()) {
        throw ParseError(fmt::format("'{}': expected {} fields, found {}", path.string(), header.size(),
                                     cells.size()),
                         line_no);
      }
      rows_.push_back(std::move(cells));
      lines_.push_back(line_no);
    }
  }

  std::size_t size() const { return rows_.size(); }
  bool has(const std::string& col) const { return columns_.count(col) > 0; }
  const std::string& cell(std::size_t row, const std::string& col) const {
    return rows_[row][columns_.at(col)];
  }

  template <typename T>
  T number(std::size_t row, const std::string& col) const {
    const auto& text = cell(row, col);
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw ParseError(fmt::format("'{}': bad {} '{}'", path_.string(), col, text), lines_[row]);
    }
    return v;
  }

  Species species(std::size_t row) const {
    auto s = parse_species(cell(row, "species"));
    if (!s || !is_insect(*s)) {
      throw ParseError(fmt::format("'{}': unknown species '{}'", path_.string(), cell(row, "species")),
                       lines_[row]);
    }
    return *s;
  }

  std::size_t line(std::size_t row) const { return lines_[row]; }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  fs::path path_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

std::map<std::string, Point> read_final_flowers(const fs::path& path) {
  CsvTable t(path, {"flower_id", "epoch_frame", "x", "y"});
  std::map<std::string, std::pair<std::int64_t, Point>> latest;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto frame = t.number<std::int64_t>(i, "epoch_frame");
    auto& slot = latest[t.cell(i, "flower_id")];
    if (frame >= slot.first) slot = {frame, {t.number<double>(i, "x"), t.number<double>(i, "y")}};
  }
  std::map<std::string, Point> out;
  for (const auto& [id, v] : latest) out[id] = v.second;
  return out;
}

std::vector<VisitEvent> read_visits(const CsvTable& t, const std::map<std::string, int>& ids,
                                    const std::string& id_column) {
  std::vector<VisitEvent> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    VisitEvent v;
    if (id_column.empty()) {
      auto it = ids.find(t.cell(i, "track_key"));
      if (it == ids.end()) {
        throw ParseError(fmt::format("visit refers to unknown track '{}'", t.cell(i, "track_key")), t.line(i));
      }
      v.track_id = it->second;
    } else {
      v.track_id = t.number<int>(i, id_column);
    }
    v.track_code = t.cell(i, "track_code");
    v.species = t.species(i);
    v.flower_id = t.cell(i, "flower_id");
    v.entry_frame = t.number<std::int64_t>(i, "entry_frame");
    v.exit_frame = t.number<std::int64_t>(i, "exit_frame");
    auto kind = parse_visit_kind(t.cell(i, "kind"));
    if (!kind) throw ParseError(fmt::format("unknown visit kind '{}'", t.cell(i, "kind")), t.line(i));
    v.kind = *kind;
    out.push_back(std::move(v));
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()), 0);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", path.string(), e.what()), 0);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Writers

std::string tracks_csv(const VideoResult& r) {
  std::string out = std::string(kTrackHeader) + '\n';
  std::vector<std::vector<Row>> per_track(r.tracks.size());
  for (const auto& e : r.events) {
    const auto& t = r.tracks[static_cast<std::size_t>(e.track_id)];
    per_track[static_cast<std::size_t>(e.track_id)].push_back(
        {event_rank(e.event), e.frame_index,
         track_row(t.track_code.str(), t.species, e.frame_index, e.position, e.flower_id, e.event,
                   r.track_keys[static_cast<std::size_t>(e.track_id)])});
  }
  for (std::size_t i = 0; i < r.tracks.size(); ++i) {
    const auto& t = r.tracks[i];
    auto& rows = per_track[i];
    if (r.accepted(i)) {
      for (std::size_t k = 0; k < t.points.size(); ++k) {
        const auto& p = t.points[k];
        rows.push_back({1, p.frame_index,
                        track_row(t.track_code.str(), t.species, p.frame_index, p.position,
                                  r.point_flower_ids[i][k], "", r.track_keys[i])});
      }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.frame, a.rank) < std::tie(b.frame, b.rank);
    });
    for (const auto& row : rows) out += row.text + '\n';
  }
  return out;
}

std::string visits_csv(const VideoResult& r) {
  std::string out = std::string(kVisitHeader) + '\n';
  for (const auto& v : r.visits) {
    out += fmt::format("{},{},{},{},{},{},{}\n", v.track_code, species_name(v.species), v.flower_id,
                       v.entry_frame, v.exit_frame, visit_kind_name(v.kind),
                       r.track_keys[static_cast<std::size_t>(v.track_id)]);
  }
  return out;
}

std::string flowers_csv(const std::vector<FlowerRecord>& flowers) {
  std::vector<std::tuple<std::int64_t, std::size_t, std::string>> rows;
  for (std::size_t i = 0; i < flowers.size(); ++i) {
    for (const auto& e : flowers[i].epoch_history) {
      rows.emplace_back(e.frame_index, i,
                        fmt::format("{},{},{},{},{},{}", flowers[i].flower_id, e.frame_index, e.center.x,
                                    e.center.y, e.radius, e.detected ? 1 : 0));
    }
  }
  std::sort(rows.begin(), rows.end());
  std::string out = std::string(kFlowerHeader) + '\n';
  for (const auto& row : rows) out += std::get<2>(row) + '\n';
  return out;
}

std::string summary_json(const VideoResult& r) {
  json j;
  j["video_id"] = r.video_id;
  j["camera_number"] = r.meta.camera_number;
  j["record_date"] = format_date(r.meta.record_date);
  j["record_start_time"] = format_time_of_day(r.meta.record_start_time);
  j["fps"] = r.meta.fps;
  j["frame_width"] = r.meta.frame_width;
  j["frame_height"] = r.meta.frame_height;
  j["fertilisation_threshold"] = r.config.fertilisation_threshold;
  j["frames"] = {{"total", r.stats.frames},
                 {"full_resolution", r.stats.full_frames},
                 {"low_resolution", r.stats.lowres_frames},
                 {"deep_detector", r.stats.deep_frames},
                 {"segmentation", r.stats.segmentation_frames}};
  json counts = json::object();
  for (Species s : kInsectSpecies) counts[std::string(species_name(s))] = 0;
  json tracks = json::array();
  int culled = 0;
  for (std::size_t i = 0; i < r.tracks.size(); ++i) {
    const auto& t = r.tracks[i];
    if (!r.accepted(i)) {
      ++culled;
      continue;
    }
    counts[std::string(species_name(t.species))] = counts[std::string(species_name(t.species))].get<int>() + 1;
    std::int64_t observed = 0;
    for (const auto& p : t.points) observed += p.source != PointSource::Interpolated ? 1 : 0;
    tracks.push_back({{"track_key", r.track_keys[i]},
                      {"track_code", t.track_code.str()},
                      {"species", species_name(t.species)},
                      {"first_frame", t.first_frame()},
                      {"last_frame", t.last_frame()},
                      {"points", t.points.size()},
                      {"observed_points", observed},
                      {"visits", t.visits.size()}});
  }
  j["track_counts"] = counts;
  j["culled_tracks"] = culled;
  j["tracks"] = tracks;
  json flowers = json::array();
  for (const auto& f : r.flowers) {
    flowers.push_back({{"flower_id", f.flower_id}, {"x", f.center.x}, {"y", f.center.y}, {"radius", f.radius}});
  }
  j["flowers"] = flowers;
  j["visit_count"] = r.visits.size();
  json cfg = json::object();
  std::istringstream text(config_to_text(r.config));
  for (const auto& [k, v] : parse_key_value_text(text)) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + '\n';
}

void write_video_dataset(const fs::path& dir, const VideoResult& r) {
  fs::create_directories(dir);
  write_text(tracks_file(dir, r.video_id), tracks_csv(r));
  write_text(visits_file(dir, r.video_id), visits_csv(r));
  write_text(flowers_file(dir, r.video_id), flowers_csv(r.flowers));
  write_text(summary_file(dir, r.video_id), summary_json(r));
}

void write_truth_dataset(const fs::path& dir, const std::string& video_id, const GroundTruth& truth) {
  fs::create_directories(dir);
  const auto& cfg = truth.config;

  std::string tracks = std::string(kTrackHeader) + ",true_track_id,w,h\n";
  for (const auto& insect : truth.insects) {
    if (insect.positions.empty()) continue;
    const std::string code = true_track_code(truth, insect).str();
    const auto suffix = fmt::format(",{},{},{}", insect.true_id, insect.extent.w, insect.extent.h);
    const auto key = fmt::format("T{}", insect.true_id);
    std::vector<Row> rows;
    const auto& first = insect.positions.front();
    const auto& last = insect.positions.back();
    rows.push_back({0, first.frame_index, track_row(code, insect.species, first.frame_index, first.center, "", "created", key) + suffix});
    for (const auto& p : insect.positions) {
      const auto flowers = flowers_at(truth, p.frame_index);
      const auto inside = containing_flower(p.center, flowers);
      rows.push_back({1, p.frame_index,
                      track_row(code, insect.species, p.frame_index, p.center,
                                inside ? flowers[*inside].flower_id : "", "", key) + suffix});
    }
    for (const auto& v : truth.visits) {
      if (v.track_id != insect.true_id) continue;
      const auto at = [&](std::int64_t f) { return insect.positions[static_cast<std::size_t>(f - first.frame_index)].center; };
      rows.push_back({3, v.entry_frame, track_row(code, insect.species, v.entry_frame, at(v.entry_frame), v.flower_id, "visit_start", key) + suffix});
      rows.push_back({2, v.exit_frame, track_row(code, insect.species, v.exit_frame, at(v.exit_frame), v.flower_id, "visit_end", key) + suffix});
    }
    rows.push_back({4, last.frame_index, track_row(code, insect.species, last.frame_index, last.center, "", "closed", key) + suffix});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.frame, a.rank) < std::tie(b.frame, b.rank);
    });
    for (const auto& row : rows) tracks += row.text + '\n';
  }
  write_text(truth_tracks_file(dir, video_id), tracks);

  std::string visits = std::string(kVisitHeader) + ",true_track_id\n";
  for (const auto& v : truth.visits) {
    visits += fmt::format("{},{},{},{},{},{},T{},{}\n", v.track_code, species_name(v.species), v.flower_id,
                          v.entry_frame, v.exit_frame, visit_kind_name(v.kind), v.track_id, v.track_id);
  }
  write_text(truth_visits_file(dir, video_id), visits);

  std::vector<FlowerRecord> records;
  for (const auto& f : truth.flowers) records.push_back({f.flower_id, f.epochs.back().center, f.radius, f.epochs});
  write_text(truth_flowers_file(dir, video_id), flowers_csv(records));

  json j;
  j["video_id"] = video_id;
  j["frame_count"] = cfg.frame_count;
  j["camera_number"] = cfg.camera_number;
  j["insects"] = truth.insects.size();
  j["flowers"] = truth.flowers.size();
  j["visits"] = truth.visits.size();
  j["seed"] = cfg.seed;
  write_text(truth_summary_file(dir, video_id), j.dump(2) + '\n');
}

// ---------------------------------------------------------------------------
// Readers

VideoSummary read_summary(const fs::path& path) {
  const json j = read_json(path);
  try {
    VideoSummary s;
    s.video_id = j.at("video_id").get<std::string>();
    s.camera_number = j.at("camera_number").get<int>();
    s.fertilisation_threshold = j.at("fertilisation_threshold").get<int>();
    s.frames = j.at("frames").at("total").get<std::int64_t>();
    for (const auto& [name, n] : j.at("track_counts").items()) {
      auto sp = parse_species(name);
      if (!sp || !is_insect(*sp)) throw ParseError(fmt::format("'{}': unknown species '{}'", path.string(), name), 0);
      s.track_counts[*sp] = n.get<int>();
    }
    s.frame_width = j.at("frame_width").get<int>();
    s.frame_height = j.at("frame_height").get<int>();
    for (const auto& f : j.at("flowers")) {
      s.flower_ids.push_back(f.at("flower_id").get<std::string>());
      s.final_flowers.push_back({s.flower_ids.back(),
                                 {f.at("x").get<double>(), f.at("y").get<double>()},
                                 f.at("radius").get<double>(),
                                 {}});
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", path.string(), e.what()), 0);
  }
}

PredictedDataset read_predicted(const fs::path& dir, const std::string& video_id) {
  PredictedDataset out;
  CsvTable t(tracks_file(dir, video_id), {"track_code", "species", "frame", "x", "y", "event", "track_key"});
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.cell(i, "event").empty()) continue;
    const auto& key = t.cell(i, "track_key");
    auto [it, fresh] = ids.try_emplace(key, static_cast<int>(out.tracks.size()));
    if (fresh) out.tracks.push_back({it->second, key, t.species(i), {}});
    auto& track = out.tracks[static_cast<std::size_t>(it->second)];
    const auto frame = t.number<std::int64_t>(i, "frame");
    if (!track.points.empty() && frame <= track.points.back().frame_index) {
      throw ParseError(fmt::format("track '{}' frames are not increasing", key), t.line(i));
    }
    track.points.push_back({frame, {t.number<double>(i, "x"), t.number<double>(i, "y")}});
  }
  CsvTable v(visits_file(dir, video_id), {"track_code", "species", "flower_id", "entry_frame", "exit_frame", "kind", "track_key"});
  out.visits = read_visits(v, ids, "");
  out.final_flowers = read_final_flowers(flowers_file(dir, video_id));
  return out;
}

TruthDataset read_truth(const fs::path& dir, const std::string& video_id) {
  TruthDataset out;
  CsvTable t(truth_tracks_file(dir, video_id), {"species", "frame", "x", "y", "event", "true_track_id", "w", "h"});
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.cell(i, "event").empty()) continue;
    const int id = t.number<int>(i, "true_track_id");
    auto [it, fresh] = index.try_emplace(id, out.tracks.size());
    if (fresh) out.tracks.push_back({id, t.species(i), {}});
    out.tracks[it->second].bodies.push_back({t.number<std::int64_t>(i, "frame"),
                                             {t.number<double>(i, "x"), t.number<double>(i, "y")},
                                             {t.number<double>(i, "w"), t.number<double>(i, "h")}});
  }
  CsvTable v(truth_visits_file(dir, video_id), {"track_code", "species", "flower_id", "entry_frame", "exit_frame", "kind", "true_track_id"});
  out.visits = read_visits(v, {}, "true_track_id");
  out.final_flowers = read_final_flowers(truth_flowers_file(dir, video_id));
  const json j = read_json(truth_summary_file(dir, video_id));
  try {
    out.frame_count = j.at("frame_count").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("truth summary: {}", e.what()), 0);
  }
  return out;
}

void add_video_to_log(VisitLog& log, const fs::path& dir, const VideoSummary& summary) {
  const auto prefix = summary.video_id + "/";
  for (const auto& f : summary.flower_ids) log.add_flower(prefix + f);
  const json j = read_json(summary_file(dir, summary.video_id));
  try {
    for (const auto& t : j.at("tracks")) {
      auto sp = parse_species(t.at("species").get<std::string>());
      if (!sp || !is_insect(*sp)) throw ParseError("summary track has an unknown species", 0);
      log.add_insect(*sp, prefix + t.at("track_key").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", summary_file(dir, summary.video_id).string(), e.what()), 0);
  }
  CsvTable v(visits_file(dir, summary.video_id), {"species", "flower_id", "track_key"});
  for (std::size_t i = 0; i < v.size(); ++i) {
    log.add_visit(prefix + v.cell(i, "flower_id"), v.species(i), prefix + v.cell(i, "track_key"));
  }
}

}  // namespace pollitrack
