#pragma once

// Core domain types. All timestamps are minute-resolution integers relative
// to ICU admission. Value objects are immutable after construction and safe
// to share across threads.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbt/schema.hpp"

namespace fbt {

enum class Gender { male, female };

inline const char* gender_name(Gender g) { return g == Gender::male ? "male" : "female"; }

inline bool parse_gender(const std::string& s, Gender& out) {
  if (s == "male" || s == "m") {
    out = Gender::male;
    return true;
  }
  if (s == "female" || s == "f") {
    out = Gender::female;
    return true;
  }
  return false;
}

struct PatientRecord {
  std::string patient_id;
  double age = 0.0;  // years
  Gender gender = Gender::male;
  int ethnicity = 4;  // index into ethnicity_codes(), unknown -> "other"
  std::optional<double> weight;  // kg
  std::optional<double> height;  // cm
  int sofa_at_admission = 0;
  std::vector<uint8_t> comorbidity_flags;  // one per comorbidity category
  int64_t icu_admit_time = 0;
  int64_t icu_discharge_time = 0;

  int64_t stay_minutes() const { return icu_discharge_time - icu_admit_time; }
};

enum class FluidClass { none, crystalloid, other };

inline const char* fluid_class_name(FluidClass f) {
  switch (f) {
    case FluidClass::crystalloid: return "crystalloid";
    case FluidClass::other: return "other";
    default: return "";
  }
}

struct Event {
  int64_t time = 0;  // minutes since ICU admission
  EventKind kind = EventKind::heart_rate;
  double value = 0.0;
  // fluid_infusion only:
  double rate = 0.0;    // ml/hr
  double volume = 0.0;  // ml
  FluidClass fluid_class = FluidClass::none;
};

struct EventStream {
  std::string patient_id;
  std::vector<Event> events;  // sorted by time, ties keep ingestion order
};

struct Dataset {
  std::map<std::string, PatientRecord> patients;
  std::map<std::string, EventStream> streams;
};

enum class ExclusionReason {
  none,
  under_18,
  stay_lt_12h,
  no_fbt_in_24h,
  not_hypotensive,
  insufficient_map_data,
};

inline const char* exclusion_reason_name(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::under_18: return "under_18";
    case ExclusionReason::stay_lt_12h: return "stay_lt_12h";
    case ExclusionReason::no_fbt_in_24h: return "no_fbt_in_24h";
    case ExclusionReason::not_hypotensive: return "not_hypotensive";
    case ExclusionReason::insufficient_map_data: return "insufficient_map_data";
    default: return "none";
  }
}

inline bool parse_exclusion_reason(const std::string& s, ExclusionReason& out) {
  for (ExclusionReason r : {ExclusionReason::none, ExclusionReason::under_18,
                            ExclusionReason::stay_lt_12h, ExclusionReason::no_fbt_in_24h,
                            ExclusionReason::not_hypotensive,
                            ExclusionReason::insufficient_map_data}) {
    if (s == exclusion_reason_name(r)) {
      out = r;
      return true;
    }
  }
  return false;
}

struct FbtEpisode {
  std::string patient_id;
  bool included = false;
  ExclusionReason exclusion_reason = ExclusionReason::none;
  int64_t fbt_start = 0;
  double fbt_rate = 0.0;
  double fbt_volume = 0.0;
  double map_at_start = 0.0;
  int label = -1;  // 1 = success, 0 = failure, -1 = not labeled
};

}  // namespace fbt
