#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pollitrack/core_model.hpp"
#include "pollitrack/visits.hpp"

namespace pollitrack {

// ---------------------------------------------------------------------------
// Pollination metrics
// ---------------------------------------------------------------------------

/// Visit counts n[f][i][j]: visits by insect j of species i to flower f.
class VisitLog {
 public:
  void add_flower(const std::string& flower);
  void add_insect(Species species, const std::string& insect);
  void add_visit(const std::string& flower, Species species, const std::string& insect,
                 int count = 1);

  /// Every Visit and ReVisit counts once.
  static VisitLog from_events(const std::vector<VisitEvent>& events,
                              const std::vector<std::string>& flower_ids);

  const std::set<std::string>& flowers() const noexcept { return flowers_; }
  /// Species with at least one registered insect.
  std::set<Species> species() const;
  const std::map<Species, std::set<std::string>>& insects() const noexcept { return insects_; }
  int count(const std::string& flower, Species species, const std::string& insect) const;
  const std::map<std::string, std::map<Species, std::map<std::string, int>>>& counts()
      const noexcept {
    return counts_;
  }

 private:
  std::set<std::string> flowers_;
  std::map<Species, std::set<std::string>> insects_;
  std::map<std::string, std::map<Species, std::map<std::string, int>>> counts_;
};

/// Flower visits made by a species: sum over its insects and all flowers.
int fv(const VisitLog& log, Species species);
/// Visits to flower f from one species.
int vf(const VisitLog& log, const std::string& flower, Species species);
/// Visits to flower f from all species.
int v(const VisitLog& log, const std::string& flower);
/// Flowers with vf(f, species) >= threshold.
int n_pol_species(const VisitLog& log, Species species, int threshold);
/// Sum of n_pol_species over species; a flower reaching the threshold with
/// two species separately is counted twice.
int n_pol(const VisitLog& log, int threshold);
/// Flowers with v(f) >= threshold, pooling all species.
int n_pol_combined(const VisitLog& log, int threshold);

// ---------------------------------------------------------------------------
// Detection evaluation
// ---------------------------------------------------------------------------

/// Absent when the denominator is zero.
std::optional<double> precision(std::int64_t tp, std::int64_t fp);
std::optional<double> recall(std::int64_t tp, std::int64_t fn);
std::optional<double> f_score(std::optional<double> p, std::optional<double> r);

struct EvaluationCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  int identity_swaps = 0;

  std::optional<double> precision() const { return pollitrack::precision(tp, fp); }
  std::optional<double> recall() const { return pollitrack::recall(tp, fn); }
  std::optional<double> f_score() const { return pollitrack::f_score(precision(), recall()); }

  EvaluationCounts& operator+=(const EvaluationCounts& o);
};

struct BodyRegion {
  std::int64_t frame_index = 0;
  Point center;
  Extent extent;
};

struct TruthTrack {
  int true_id = 0;
  Species species = Species::Honeybee;
  std::vector<BodyRegion> bodies;  // one per visible frame, increasing frames
};

struct PredictedPoint {
  std::int64_t frame_index = 0;
  Point position;
};

struct PredictedTrack {
  int id = 0;
  std::string key;  // track code, disambiguated when two tracks share one
  Species species = Species::Honeybee;
  std::vector<PredictedPoint> points;
};

struct InsectEvaluation {
  int true_id = 0;
  Species species = Species::Honeybee;
  std::int64_t visible_frames = 0;
  bool ignored = false;  // visible for fewer than min_track_frames
  std::vector<int> matched_tracks;
  EvaluationCounts counts;
};

struct TrackEvaluation {
  std::vector<InsectEvaluation> insects;
  std::map<int, int> track_to_truth;  // predicted id -> true id (matched tracks only)
  std::vector<int> false_positive_tracks;
  EvaluationCounts aggregate;
};

/// Point-level comparison of predicted tracks with ground-truth bodies. Each
/// predicted track is matched to the true insect whose body contains most of its
/// points. A visible true position is TP when a matched track has a point inside
/// the body at that frame, else FN. Other predicted points are FP, except points
/// on insects ignored for being visible under min_track_frames. Identity swaps
/// count the extra tracks matched to one insect. Throws EvaluationError when a
/// predicted frame lies outside [0, frame_count).
TrackEvaluation evaluate_tracks(const std::vector<PredictedTrack>& predicted,
                                const std::vector<TruthTrack>& truth, int min_track_frames,
                                std::int64_t frame_count);

/// Pairs predicted flower ids with true ones by gated Hungarian matching on centres.
std::map<std::string, std::string> match_flowers(const std::map<std::string, Point>& predicted,
                                                 const std::map<std::string, Point>& truth,
                                                 double gate);

struct VisitEvaluation {
  EvaluationCounts counts;
  std::map<Species, EvaluationCounts> by_species;
  std::map<Species, std::int64_t> observed_by_species;
  std::vector<std::string> false_negative_reasons;  // one per FN, in truth order
};

/// A predicted visit is TP when its insect and flower map onto a true visit with
/// an overlapping frame interval; each true visit is consumed at most once.
VisitEvaluation evaluate_visits(const std::vector<VisitEvent>& predicted,
                                const std::vector<VisitEvent>& truth,
                                const std::map<int, int>& track_to_truth,
                                const std::map<std::string, std::string>& flower_map);

/// Per-species roll-up in the layout of a tracking results table.
struct SpeciesTrackRow {
  Species species = Species::Honeybee;
  int observed = 0;
  std::int64_t visible_frames = 0;
  int tracklets = 0;
  int insects_tracked = 0;
  int insects_missed = 0;
  int false_tracks = 0;
  int identity_swaps = 0;
  std::optional<double> precision;  // means over tracked insects
  std::optional<double> recall;
  std::optional<double> f_score;
  EvaluationCounts points;
};

std::vector<SpeciesTrackRow> summarize_by_species(const TrackEvaluation& eval,
                                                  const std::vector<PredictedTrack>& predicted);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct PollinationReport {
  std::string location_id;
  int fertilisation_threshold = 4;
  int flower_count = 0;
  int total_visits = 0;
  std::map<Species, int> track_counts;
  std::map<Species, int> fv;
  std::map<std::string, std::map<Species, int>> vf;
  std::map<std::string, int> v;
  std::map<Species, int> n_pol_species;
  int n_pol_literal = 0;
  int n_pol_combined = 0;
  std::map<Species, double> flowers_visited_pct;  // flowers with >= 1 visit from the species
  std::map<Species, double> fertilised_pct;       // flowers reaching the threshold from the species alone
  double fertilised_combined_pct = 0.0;
};

PollinationReport build_report(const std::string& location_id, const VisitLog& log,
                               const std::map<Species, int>& track_counts, int threshold);

}  // namespace pollitrack
