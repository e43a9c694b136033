#include <catch2/catch_amalgamated.hpp>

#include "fbt/schema.hpp"

using namespace fbt;

TEST_CASE("schema enumerates exactly 29 named features") {
  const auto& s = FeatureSchema::instance();
  REQUIRE(s.named_features().size() == 29);
  // 6 demographics + 1 comorbidity block + 22 time-varying kinds
  REQUIRE(s.timevarying_kinds().size() == 22);
  REQUIRE(s.named_features()[6] == "elixhauser_comorbidities");
}

TEST_CASE("feature index to name mapping is bijective") {
  const auto& s = FeatureSchema::instance();
  for (const auto* cols : {&s.aggregated_columns(), &s.series_columns(), &s.static_columns()}) {
    std::set<std::string> seen(cols->begin(), cols->end());
    REQUIRE(seen.size() == cols->size());
  }
  for (size_t i = 0; i < s.aggregated_columns().size(); ++i)
    REQUIRE(s.column_index_aggregated(s.aggregated_columns()[i]) == static_cast<int>(i));
}

TEST_CASE("aggregated columns exclude MAP, series columns include it") {
  const auto& s = FeatureSchema::instance();
  for (const auto& c : s.aggregated_columns())
    REQUIRE(c.find("mean_arterial_pressure") == std::string::npos);
  bool found = false;
  for (const auto& c : s.series_columns())
    if (c == "mean_arterial_pressure") found = true;
  REQUIRE(found);
  // static block + 3 anchors x 21 kinds
  REQUIRE(s.aggregated_dim() == s.static_dim() + 3 * 21);
  REQUIRE(s.series_dim() == s.static_dim() + 22);
}

TEST_CASE("validate_event accepts in-range vitals") {
  RawEvent e;
  e.kind = "heart_rate";
  e.value = 72.0;
  REQUIRE(validate_event(e).ok());
}

TEST_CASE("validate_event flags negative vital as below plausible range") {
  RawEvent e;
  e.kind = "heart_rate";
  e.value = -5.0;
  auto r = validate_event(e);
  REQUIRE_FALSE(r.ok());
  REQUIRE(r.violations[0].find("below plausible range") != std::string::npos);
}

TEST_CASE("validate_event rejects unknown kinds") {
  RawEvent e;
  e.kind = "glucose";
  e.value = 100.0;
  auto r = validate_event(e);
  REQUIRE_FALSE(r.ok());
  REQUIRE(r.violations[0].find("unknown kind") != std::string::npos);
}

TEST_CASE("validate_event flags negative fluid rate") {
  RawEvent e;
  e.kind = "fluid_infusion";
  e.value = 500.0;
  e.has_rate = true;
  e.rate = -1.0;
  auto r = validate_event(e);
  REQUIRE_FALSE(r.ok());
}

TEST_CASE("schema file pins order, units, and ranges") {
  const auto text = FeatureSchema::instance().schema_file_text();
  REQUIRE(text.find("named_feature_count=29") != std::string::npos);
  REQUIRE(text.find("timevarying heart_rate unit=bpm range=0:300") != std::string::npos);
  REQUIRE(text.find("absent=zero") != std::string::npos);    // vasopressors
  REQUIRE(text.find("absent=missing") != std::string::npos); // vitals/labs
  REQUIRE(text.find("aggregated_excludes=mean_arterial_pressure") != std::string::npos);
}
