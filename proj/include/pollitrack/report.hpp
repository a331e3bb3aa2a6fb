#pragma once

#include <filesystem>
#include <map>
#include <utility>
#include <string>
#include <vector>

#include "pollitrack/metrics.hpp"

namespace pollitrack {

/// Per-video dataset files found in a directory, grouped by camera (one camera is one location).
struct LocationData {
  std::string location_id;  // "cam<N>"
  std::vector<std::pair<std::filesystem::path, std::string>> videos;  // (directory, video_id)
  int frame_width = 0;
  int frame_height = 0;
  VisitLog log;
  std::map<Species, int> track_counts;
};

struct AggregateReport {
  int fertilisation_threshold = 0;
  std::vector<LocationData> locations;
  std::vector<PollinationReport> reports;  // parallel to locations
};

/// Reads every <video>_summary.json under the given directories. Throws
/// AggregationError when nothing is found or thresholds disagree.
AggregateReport aggregate_locations(const std::vector<std::filesystem::path>& dataset_dirs);

std::string report_json(const PollinationReport& r);

/// Fig-style bar data: one row per location and species plus an "all" row.
std::string aggregate_csv(const AggregateReport& a);
/// Share of flowers visited by each species and share reaching the threshold from it alone.
std::string species_csv(const AggregateReport& a);

/// Writes location_<id>.json, aggregate.csv, species_visits.csv, trajectories.csv
/// and trajectories_<id>.svg into out_dir.
void write_report(const AggregateReport& a, const std::filesystem::path& out_dir);

}  // namespace pollitrack
