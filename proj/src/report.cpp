#include "pollitrack/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <json.hpp>

#include "pollitrack/dataset_io.hpp"
#include "pollitrack/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pollitrack {

namespace {

constexpr std::string_view kSummarySuffix = "_summary.json";

std::string_view species_colour(Species s) {
  switch (s) {
    case Species::Honeybee: return "#d4a017";
    case Species::Syrphidae: return "#2e8b57";
    case Species::Lepidoptera: return "#6a5acd";
    case Species::Vespidae: return "#c0392b";
    default: return "#555555";
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

json species_map(const std::map<Species, int>& m) {
  json j = json::object();
  for (const auto& [s, n] : m) j[std::string(species_name(s))] = n;
  return j;
}

json species_map(const std::map<Species, double>& m) {
  json j = json::object();
  for (const auto& [s, v] : m) j[std::string(species_name(s))] = v;
  return j;
}

}  // namespace

AggregateReport aggregate_locations(const std::vector<fs::path>& dataset_dirs) {
  std::map<int, LocationData> by_camera;
  std::optional<int> threshold;
  for (const auto& dir : dataset_dirs) {
    if (!fs::is_directory(dir)) throw AggregationError(fmt::format("'{}' is not a directory", dir.string()));
    std::vector<fs::path> summaries;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > kSummarySuffix.size() && name.ends_with(kSummarySuffix) &&
          !name.ends_with("_truth_summary.json")) {
        summaries.push_back(entry.path());
      }
    }
    std::sort(summaries.begin(), summaries.end());
    for (const auto& path : summaries) {
      const VideoSummary s = read_summary(path);
      if (threshold && *threshold != s.fertilisation_threshold) {
        throw AggregationError(fmt::format("video '{}' uses fertilisation threshold {}, others use {}",
                                           s.video_id, s.fertilisation_threshold, *threshold));
      }
      threshold = s.fertilisation_threshold;
      auto& loc = by_camera[s.camera_number];
      loc.location_id = fmt::format("cam{}", s.camera_number);
      loc.videos.emplace_back(dir, s.video_id);
      loc.frame_width = std::max(loc.frame_width, s.frame_width);
      loc.frame_height = std::max(loc.frame_height, s.frame_height);
      for (const auto& [sp, n] : s.track_counts) loc.track_counts[sp] += n;
      add_video_to_log(loc.log, dir, s);
    }
  }
  if (!threshold) throw AggregationError("no per-video summaries found");

  AggregateReport out;
  out.fertilisation_threshold = *threshold;
  for (auto& [camera, loc] : by_camera) {
    out.reports.push_back(build_report(loc.location_id, loc.log, loc.track_counts, *threshold));
    out.locations.push_back(std::move(loc));
  }
  return out;
}

std::string report_json(const PollinationReport& r) {
  json j;
  j["location_id"] = r.location_id;
  j["fertilisation_threshold"] = r.fertilisation_threshold;
  j["flower_count"] = r.flower_count;
  j["total_visits"] = r.total_visits;
  j["track_counts"] = species_map(r.track_counts);
  j["flower_visits_by_species"] = species_map(r.fv);
  json vf = json::object();
  for (const auto& [f, m] : r.vf) vf[f] = species_map(m);
  j["visits_by_flower_and_species"] = vf;
  j["visits_by_flower"] = r.v;
  j["fertilised_flowers_by_species"] = species_map(r.n_pol_species);
  j["fertilised_flowers_per_species_sum"] = r.n_pol_literal;
  j["fertilised_flowers_combined"] = r.n_pol_combined;
  j["flowers_visited_pct"] = species_map(r.flowers_visited_pct);
  j["fertilised_pct"] = species_map(r.fertilised_pct);
  j["fertilised_combined_pct"] = r.fertilised_combined_pct;
  return j.dump(2) + '\n';
}

std::string aggregate_csv(const AggregateReport& a) {
  std::string out = "location,species,tracks,visits,visits_per_track,flowers,flowers_fertilised\n";
  for (const auto& r : a.reports) {
    int tracks = 0;
    for (Species s : kInsectSpecies) {
      const int n = r.track_counts.at(s);
      const int visits = r.fv.at(s);
      tracks += n;
      out += fmt::format("{},{},{},{},{},{},{}\n", r.location_id, species_name(s), n, visits,
                         n > 0 ? fmt::format("{:.4f}", static_cast<double>(visits) / n) : "",
                         r.flower_count, r.n_pol_species.at(s));
    }
    out += fmt::format("{},all,{},{},{},{},{}\n", r.location_id, tracks, r.total_visits,
                       tracks > 0 ? fmt::format("{:.4f}", static_cast<double>(r.total_visits) / tracks) : "",
                       r.flower_count, r.n_pol_combined);
  }
  return out;
}

std::string species_csv(const AggregateReport& a) {
  std::string out = "location,species,flowers_visited_pct,fertilised_pct\n";
  for (const auto& r : a.reports) {
    for (Species s : kInsectSpecies) {
      out += fmt::format("{},{},{:.2f},{:.2f}\n", r.location_id, species_name(s),
                         r.flowers_visited_pct.at(s), r.fertilised_pct.at(s));
    }
    out += fmt::format("{},combined,,{:.2f}\n", r.location_id, r.fertilised_combined_pct);
  }
  return out;
}

void write_report(const AggregateReport& a, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& r : a.reports) write_file(out_dir / fmt::format("location_{}.json", r.location_id), report_json(r));
  write_file(out_dir / "aggregate.csv", aggregate_csv(a));
  write_file(out_dir / "species_visits.csv", species_csv(a));

  std::string traj = "location,video_id,kind,id,species,frame,x,y,radius\n";
  for (const auto& loc : a.locations) {
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        loc.frame_width, loc.frame_height);
    for (const auto& [dir, video] : loc.videos) {
      const VideoSummary s = read_summary(summary_file(dir, video));
      for (const auto& f : s.final_flowers) {
        traj += fmt::format("{},{},flower,{},,,{},{},{}\n", loc.location_id, video, f.flower_id, f.center.x,
                            f.center.y, f.radius);
        svg += fmt::format(
            "<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"{:.1f}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"2\"/>\n",
            f.center.x, f.center.y, f.radius);
      }
      const PredictedDataset d = read_predicted(dir, video);
      for (const auto& t : d.tracks) {
        std::string points;
        for (const auto& p : t.points) {
          traj += fmt::format("{},{},point,{},{},{},{},{},\n", loc.location_id, video, t.key, species_name(t.species),
                              p.frame_index, p.position.x, p.position.y);
          points += fmt::format("{:.1f},{:.1f} ", p.position.x, p.position.y);
        }
        if (!points.empty()) points.pop_back();
        svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                           points, species_colour(t.species));
      }
    }
    int y = 20;
    for (Species s : kInsectSpecies) {
      svg += fmt::format("<text x=\"10\" y=\"{}\" font-size=\"16\" fill=\"{}\">{}</text>\n", y,
                         species_colour(s), species_name(s));
      y += 20;
    }
    svg += "</svg>\n";
    write_file(out_dir / fmt::format("trajectories_{}.svg", loc.location_id), svg);
  }
  write_file(out_dir / "trajectories.csv", traj);
}

}  // namespace pollitrack
