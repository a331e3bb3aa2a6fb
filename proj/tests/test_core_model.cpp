#include <doctest.h>

#include <random>
#include <sstream>

#include "pollitrack/core_model.hpp"

using namespace pollitrack;
using namespace std::chrono;

namespace {

VideoMeta meta(int camera, int day, int h, int m, int s) {
  VideoMeta v;
  v.camera_number = camera;
  v.record_date = year{2021} / March / std::chrono::day{static_cast<unsigned>(day)};
  v.record_start_time = hours{h} + minutes{m} + seconds{s};
  return v;
}

}  // namespace

TEST_CASE("species suffixes and names") {
  CHECK(species_suffix(Species::Honeybee) == 0);
  CHECK(species_suffix(Species::Syrphidae) == 1);
  CHECK(species_suffix(Species::Lepidoptera) == 2);
  CHECK(species_suffix(Species::Vespidae) == 3);
  CHECK_THROWS_AS(species_suffix(Species::Flower), std::invalid_argument);
  CHECK_FALSE(species_from_suffix(4));
  for (Species s : kInsectSpecies) {
    CHECK(species_from_suffix(species_suffix(s)) == s);
    CHECK(parse_species(species_name(s)) == s);
  }
  CHECK(parse_species("hoverfly") == Species::Syrphidae);
  CHECK(parse_species("wasp") == Species::Vespidae);
  CHECK_FALSE(parse_species("beetle"));
}

TEST_CASE("track code from the first detection") {
  auto code = make_track_code(meta(4, 9, 13, 31, 55), 0, Species::Syrphidae);
  CHECK(code.str() == "40913315501");

  // 30 fps: frame 45 is 1.5 s in, truncated to 1 s
  code = make_track_code(meta(7, 10, 14, 27, 56), 45, Species::Vespidae);
  CHECK(code.str() == "71014275703");

  auto d = decode_track_code(TrackCode::parse("71014275703"));
  CHECK(d.camera_number == 7);
  CHECK(d.day_of_month == 10);
  CHECK(d.time_of_day == hours{14} + minutes{27} + seconds{57});
  CHECK(d.species == Species::Vespidae);
}

TEST_CASE("track code rolls the day past midnight") {
  auto code = make_track_code(meta(2, 31, 23, 59, 50), 30 * 15, Species::Honeybee);
  CHECK(code.str() == "20100000500");
}

TEST_CASE("track code rejects cameras outside 1..9") {
  CHECK_THROWS_AS(make_track_code(meta(10, 1, 9, 0, 0), 0, Species::Honeybee), ConfigError);
  CHECK_THROWS_AS(make_track_code(meta(0, 1, 9, 0, 0), 0, Species::Honeybee), ConfigError);
  CHECK_THROWS(make_track_code(meta(1, 1, 9, 0, 0), 0, Species::Flower));
}

TEST_CASE("TrackCode::parse rejects malformed text") {
  CHECK_THROWS(TrackCode::parse("4091331550"));
  CHECK_THROWS(TrackCode::parse("40913315509"));
  CHECK_THROWS(TrackCode::parse("4091331550a"));
  CHECK_THROWS(TrackCode::parse("00913315501"));
}

TEST_CASE("dates and times") {
  CHECK(parse_date("2021-03-09") == year{2021} / March / day{9});
  CHECK(parse_date("09/03/2021") == year{2021} / March / day{9});
  CHECK_FALSE(parse_date("2021-02-30"));
  CHECK_FALSE(parse_date("yesterday"));
  CHECK(parse_time_of_day("13:31:55") == hours{13} + minutes{31} + seconds{55});
  CHECK_FALSE(parse_time_of_day("24:00:00"));
  CHECK(format_time_of_day(seconds{3723}) == "01:02:03");
  CHECK(format_date(year{2021} / March / day{9}) == "2021-03-09");
}

TEST_CASE("detection invariants") {
  Detection d{0, Species::Honeybee, {10, 10}, {5, 5}, 0.9, DetectionSource::DeepDetector};
  CHECK_FALSE(check_detection(d, 1920, 1080));
  d.extent.w = 0;
  CHECK(check_detection(d, 1920, 1080));
  d.extent.w = 5;
  d.confidence = 1.5;
  CHECK(check_detection(d, 1920, 1080));
  d.confidence = 0.5;
  d.center = {1920, 10};
  CHECK(check_detection(d, 1920, 1080));
}

TEST_CASE("config defaults validate and round-trip through text") {
  EngineConfig cfg;
  CHECK_NOTHROW(validate_config(cfg));
  std::istringstream in(config_to_text(cfg));
  EngineConfig back;
  back.visit_dwell_frames = 99;
  apply_config_overrides(back, parse_key_value_text(in));
  CHECK(back.visit_dwell_frames == 5);
  CHECK(config_keys().size() == 16);
}

TEST_CASE("config errors list every offending field") {
  EngineConfig cfg;
  cfg.visit_dwell_frames = 0;
  cfg.association_gate_px = -1;
  cfg.bg_k_neighbours = 60;
  try {
    validate_config(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues().size() == 3);
  }
  EngineConfig c2;
  CHECK_THROWS_AS(apply_config_overrides(c2, {{"no_such_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_config_overrides(c2, {{"visit_dwell_frames", "five"}}), ConfigError);
  apply_config_overrides(c2, {{"lowres_enabled", "false"}, {"association_gate_px", "80.5"}});
  CHECK_FALSE(c2.lowres_enabled);
  CHECK(c2.association_gate_px == 80.5);
}

TEST_CASE("key=value parser") {
  std::istringstream ok("# comment\n visit_dwell_frames = 7 # trailing\n\n");
  auto kv = parse_key_value_text(ok);
  CHECK(kv.at("visit_dwell_frames") == "7");
  std::istringstream bad("visit_dwell_frames 7\n");
  CHECK_THROWS_AS(parse_key_value_text(bad), ParseError);
}

TEST_CASE("load_config applies CLI overrides after the file") {
  auto cfg = load_config(std::nullopt, {{"fertilisation_threshold", "3"}});
  CHECK(cfg->fertilisation_threshold == 3);
  CHECK_THROWS_AS(load_config(std::string("/nonexistent/config.txt")), ConfigError);
}
