#include "pollitrack/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

#include "pollitrack/assignment.hpp"
#include "pollitrack/log.hpp"

namespace pollitrack {

// ---------------------------------------------------------------------------
// VisitLog

void VisitLog::add_flower(const std::string& flower) { flowers_.insert(flower); }

void VisitLog::add_insect(Species species, const std::string& insect) {
  insects_[species].insert(insect);
}

void VisitLog::add_visit(const std::string& flower, Species species, const std::string& insect,
                         int count) {
  if (count < 0) throw std::invalid_argument("visit counts are non-negative");
  add_flower(flower);
  add_insect(species, insect);
  counts_[flower][species][insect] += count;
}

VisitLog VisitLog::from_events(const std::vector<VisitEvent>& events,
                               const std::vector<std::string>& flower_ids) {
  VisitLog log;
  for (const auto& f : flower_ids) log.add_flower(f);
  for (const auto& e : events) {
    log.add_visit(e.flower_id, e.species, fmt::format("{}:{}", e.track_code, e.track_id));
  }
  return log;
}

std::set<Species> VisitLog::species() const {
  std::set<Species> out;
  for (const auto& [s, ids] : insects_) {
    if (!ids.empty()) out.insert(s);
  }
  return out;
}

int VisitLog::count(const std::string& flower, Species species, const std::string& insect) const {
  auto f = counts_.find(flower);
  if (f == counts_.end()) return 0;
  auto s = f->second.find(species);
  if (s == f->second.end()) return 0;
  auto j = s->second.find(insect);
  return j == s->second.end() ? 0 : j->second;
}

namespace {

int vf_unchecked(const VisitLog& log, const std::string& flower, Species species) {
  auto f = log.counts().find(flower);
  if (f == log.counts().end()) return 0;
  auto s = f->second.find(species);
  if (s == f->second.end()) return 0;
  int total = 0;
  for (const auto& [insect, n] : s->second) total += n;
  return total;
}

int v_unchecked(const VisitLog& log, const std::string& flower) {
  auto f = log.counts().find(flower);
  if (f == log.counts().end()) return 0;
  int total = 0;
  for (const auto& [species, per_insect] : f->second) {
    for (const auto& [insect, n] : per_insect) total += n;
  }
  return total;
}

}  // namespace

int fv(const VisitLog& log, Species species) {
  if (log.species().count(species) == 0) {
    log_warning(fmt::format("species '{}' not present in visit log", species_name(species)));
    return 0;
  }
  int total = 0;
  for (const auto& f : log.flowers()) total += vf_unchecked(log, f, species);
  return total;
}

int vf(const VisitLog& log, const std::string& flower, Species species) {
  if (log.flowers().count(flower) == 0) {
    log_warning(fmt::format("flower '{}' not present in visit log", flower));
    return 0;
  }
  return vf_unchecked(log, flower, species);
}

int v(const VisitLog& log, const std::string& flower) {
  if (log.flowers().count(flower) == 0) {
    log_warning(fmt::format("flower '{}' not present in visit log", flower));
    return 0;
  }
  return v_unchecked(log, flower);
}

int n_pol_species(const VisitLog& log, Species species, int threshold) {
  if (threshold < 1) throw std::invalid_argument("fertilisation threshold must be >= 1");
  int n = 0;
  for (const auto& f : log.flowers()) n += vf_unchecked(log, f, species) >= threshold ? 1 : 0;
  return n;
}

int n_pol(const VisitLog& log, int threshold) {
  int n = 0;
  for (Species s : log.species()) n += n_pol_species(log, s, threshold);
  return n;
}

int n_pol_combined(const VisitLog& log, int threshold) {
  if (threshold < 1) throw std::invalid_argument("fertilisation threshold must be >= 1");
  int n = 0;
  for (const auto& f : log.flowers()) n += v_unchecked(log, f) >= threshold ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Detection metrics

std::optional<double> precision(std::int64_t tp, std::int64_t fp) {
  if (tp + fp <= 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> recall(std::int64_t tp, std::int64_t fn) {
  if (tp + fn <= 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> f_score(std::optional<double> p, std::optional<double> r) {
  if (!p || !r || *p + *r <= 0.0) return std::nullopt;
  return 2.0 * (*r * *p) / (*r + *p);
}

EvaluationCounts& EvaluationCounts::operator+=(const EvaluationCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  identity_swaps += o.identity_swaps;
  return *this;
}

// ---------------------------------------------------------------------------
// Track evaluation

TrackEvaluation evaluate_tracks(const std::vector<PredictedTrack>& predicted,
                                const std::vector<TruthTrack>& truth, int min_track_frames,
                                std::int64_t frame_count) {
  for (const auto& t : predicted) {
    for (const auto& p : t.points) {
      if (p.frame_index < 0 || p.frame_index >= frame_count) {
        throw EvaluationError(fmt::format("track {} has frame {} outside [0, {})", t.key,
                                          p.frame_index, frame_count));
      }
    }
  }

  // frame -> (insect index, body)
  std::unordered_map<std::int64_t, std::vector<std::pair<std::size_t, const BodyRegion*>>> bodies;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (const auto& b : truth[i].bodies) bodies[b.frame_index].emplace_back(i, &b);
  }
  TrackEvaluation out;
  out.insects.resize(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& ev = out.insects[i];
    ev.true_id = truth[i].true_id;
    ev.species = truth[i].species;
    ev.visible_frames = static_cast<std::int64_t>(truth[i].bodies.size());
    ev.ignored = ev.visible_frames < min_track_frames;
  }

  // Match each track to the insect covering most of its points.
  std::vector<std::optional<std::size_t>> match(predicted.size());
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    std::map<std::size_t, int> hits;
    for (const auto& p : predicted[t].points) {
      auto it = bodies.find(p.frame_index);
      if (it == bodies.end()) continue;
      for (const auto& [i, b] : it->second) {
        if (inside_box(p.position, b->center, b->extent)) ++hits[i];
      }
    }
    int best = 0;
    for (const auto& [i, n] : hits) {
      if (n > best || (n == best && match[t] && truth[i].true_id < truth[*match[t]].true_id)) {
        best = n;
        match[t] = i;
      }
    }
    if (match[t]) {
      out.insects[*match[t]].matched_tracks.push_back(predicted[t].id);
      out.track_to_truth[predicted[t].id] = truth[*match[t]].true_id;
    } else {
      out.false_positive_tracks.push_back(predicted[t].id);
    }
  }

  // TP / FN per visible true position; remember which point earned each TP.
  std::vector<std::vector<char>> used(predicted.size());
  for (std::size_t t = 0; t < predicted.size(); ++t) used[t].assign(predicted[t].points.size(), 0);
  auto point_at = [&](std::size_t t, std::int64_t frame) -> std::optional<std::size_t> {
    const auto& pts = predicted[t].points;
    auto it = std::lower_bound(pts.begin(), pts.end(), frame,
                               [](const PredictedPoint& p, std::int64_t f) { return p.frame_index < f; });
    if (it == pts.end() || it->frame_index != frame) return std::nullopt;
    return static_cast<std::size_t>(it - pts.begin());
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& ev = out.insects[i];
    if (ev.ignored) continue;
    std::vector<std::size_t> tracks;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
      if (match[t] == i) tracks.push_back(t);
    }
    for (const auto& b : truth[i].bodies) {
      bool hit = false;
      for (std::size_t t : tracks) {
        auto k = point_at(t, b.frame_index);
        if (k && inside_box(predicted[t].points[*k].position, b.center, b.extent)) {
          used[t][*k] = 1;
          hit = true;
          break;
        }
      }
      ++(hit ? ev.counts.tp : ev.counts.fn);
    }
    ev.counts.identity_swaps = std::max(0, static_cast<int>(tracks.size()) - 1);
  }

  std::int64_t unattributed_fp = 0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    for (std::size_t k = 0; k < predicted[t].points.size(); ++k) {
      if (used[t][k]) continue;
      const auto& p = predicted[t].points[k];
      bool on_ignored = false;
      if (auto it = bodies.find(p.frame_index); it != bodies.end()) {
        for (const auto& [i, b] : it->second) {
          if (out.insects[i].ignored && inside_box(p.position, b->center, b->extent)) on_ignored = true;
        }
      }
      if (on_ignored) continue;
      if (match[t] && !out.insects[*match[t]].ignored) {
        ++out.insects[*match[t]].counts.fp;
      } else {
        ++unattributed_fp;
      }
    }
  }

  for (const auto& ev : out.insects) {
    if (!ev.ignored) out.aggregate += ev.counts;
  }
  out.aggregate.fp += unattributed_fp;
  return out;
}

std::map<std::string, std::string> match_flowers(const std::map<std::string, Point>& predicted,
                                                 const std::map<std::string, Point>& truth,
                                                 double gate) {
  std::vector<std::string> pk, tk;
  for (const auto& [k, p] : predicted) pk.push_back(k);
  for (const auto& [k, p] : truth) tk.push_back(k);
  CostMatrix cost(static_cast<int>(pk.size()), static_cast<int>(tk.size()));
  for (std::size_t i = 0; i < pk.size(); ++i) {
    for (std::size_t j = 0; j < tk.size(); ++j) {
      cost(static_cast<int>(i), static_cast<int>(j)) = distance(predicted.at(pk[i]), truth.at(tk[j]));
    }
  }
  std::map<std::string, std::string> out;
  for (const auto& [r, c] : solve_assignment(cost, gate).pairs) {
    out[pk[static_cast<std::size_t>(r)]] = tk[static_cast<std::size_t>(c)];
  }
  return out;
}

VisitEvaluation evaluate_visits(const std::vector<VisitEvent>& predicted,
                                const std::vector<VisitEvent>& truth,
                                const std::map<int, int>& track_to_truth,
                                const std::map<std::string, std::string>& flower_map) {
  VisitEvaluation out;
  std::vector<char> consumed(truth.size(), 0);
  for (const auto& t : truth) ++out.observed_by_species[t.species];

  for (const auto& p : predicted) {
    bool tp = false;
    auto ti = track_to_truth.find(p.track_id);
    auto fi = flower_map.find(p.flower_id);
    if (ti != track_to_truth.end() && fi != flower_map.end()) {
      for (std::size_t k = 0; k < truth.size(); ++k) {
        const auto& t = truth[k];
        if (consumed[k] || t.track_id != ti->second || t.flower_id != fi->second) continue;
        if (p.entry_frame <= t.exit_frame && t.entry_frame <= p.exit_frame) {
          consumed[k] = 1;
          tp = true;
          ++out.counts.tp;
          ++out.by_species[t.species].tp;
          break;
        }
      }
    }
    if (!tp) {
      ++out.counts.fp;
      ++out.by_species[p.species].fp;
    }
  }

  std::set<std::string> mapped_flowers;
  for (const auto& [pred, tru] : flower_map) mapped_flowers.insert(tru);
  std::set<int> tracked_insects;
  for (const auto& [pred, tru] : track_to_truth) tracked_insects.insert(tru);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (consumed[k]) continue;
    ++out.counts.fn;
    ++out.by_species[truth[k].species].fn;
    if (mapped_flowers.count(truth[k].flower_id) == 0) {
      out.false_negative_reasons.emplace_back("undetected flower");
    } else if (tracked_insects.count(truth[k].track_id) == 0) {
      out.false_negative_reasons.emplace_back("untracked insect");
    } else {
      out.false_negative_reasons.emplace_back("missed visit");
    }
  }
  return out;
}

std::vector<SpeciesTrackRow> summarize_by_species(const TrackEvaluation& eval,
                                                  const std::vector<PredictedTrack>& predicted) {
  std::map<int, Species> predicted_species;
  for (const auto& t : predicted) predicted_species[t.id] = t.species;

  std::vector<SpeciesTrackRow> rows;
  for (Species s : kInsectSpecies) {
    SpeciesTrackRow row;
    row.species = s;
    double psum = 0, rsum = 0, fsum = 0;
    int pn = 0, rn = 0, fn = 0;
    for (const auto& ev : eval.insects) {
      if (ev.species != s) continue;
      row.tracklets += static_cast<int>(ev.matched_tracks.size());
      if (ev.ignored) continue;
      ++row.observed;
      row.visible_frames += ev.visible_frames;
      row.points += ev.counts;
      row.identity_swaps += ev.counts.identity_swaps;
      if (ev.matched_tracks.empty()) {
        ++row.insects_missed;
        continue;
      }
      ++row.insects_tracked;
      if (auto p = ev.counts.precision()) psum += *p, ++pn;
      if (auto r = ev.counts.recall()) rsum += *r, ++rn;
      if (auto f = ev.counts.f_score()) fsum += *f, ++fn;
    }
    for (int id : eval.false_positive_tracks) {
      if (predicted_species[id] == s) {
        ++row.false_tracks;
        ++row.tracklets;
      }
    }
    if (pn) row.precision = psum / pn;
    if (rn) row.recall = rsum / rn;
    if (fn) row.f_score = fsum / fn;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

PollinationReport build_report(const std::string& location_id, const VisitLog& log,
                               const std::map<Species, int>& track_counts, int threshold) {
  if (threshold < 1) throw std::invalid_argument("fertilisation threshold must be >= 1");
  PollinationReport r;
  r.location_id = location_id;
  r.fertilisation_threshold = threshold;
  r.flower_count = static_cast<int>(log.flowers().size());
  const auto present = log.species();
  for (Species s : kInsectSpecies) {
    auto it = track_counts.find(s);
    r.track_counts[s] = it == track_counts.end() ? 0 : it->second;
    r.fv[s] = present.count(s) ? fv(log, s) : 0;
    r.n_pol_species[s] = n_pol_species(log, s, threshold);
  }
  for (const auto& f : log.flowers()) {
    for (Species s : kInsectSpecies) r.vf[f][s] = vf_unchecked(log, f, s);
    r.v[f] = v_unchecked(log, f);
    r.total_visits += r.v[f];
  }
  r.n_pol_literal = n_pol(log, threshold);
  r.n_pol_combined = n_pol_combined(log, threshold);
  auto pct = [&](int n) { return r.flower_count ? 100.0 * n / r.flower_count : 0.0; };
  for (Species s : kInsectSpecies) {
    int visited = 0;
    for (const auto& f : log.flowers()) visited += r.vf[f][s] > 0 ? 1 : 0;
    r.flowers_visited_pct[s] = pct(visited);
    r.fertilised_pct[s] = pct(r.n_pol_species[s]);
  }
  r.fertilised_combined_pct = pct(r.n_pol_combined);
  return r;
}

}  // namespace pollitrack
