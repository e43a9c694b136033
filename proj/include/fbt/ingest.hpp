#pragma once

// Delimiter-separated ingestion of the two-file layout:
//   patients file: patient_id,age,gender,ethnicity,weight,height,sofa,
//                  comorbidity_<cat>...,icu_admit,icu_discharge
//   events file:   patient_id,minute_offset,kind,value,rate,volume,fluid_class
//                  (last three blank for non-fluid kinds)
// Missing numeric cells become explicit missing markers, never zero.
// Ingestion is deterministic: same files produce an identical Dataset.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fbt/common.hpp"
#include "fbt/types.hpp"

namespace fbt {

struct IngestReport {
  size_t patient_rows = 0;
  size_t event_rows = 0;
  size_t events_kept = 0;
  size_t rejected_unknown_patient = 0;
  size_t rejected_unknown_kind = 0;
  size_t rejected_negative_rate_volume = 0;
  size_t range_warnings = 0;
  size_t missing_weight = 0;
  size_t missing_height = 0;

  std::string text() const {
    std::ostringstream os;
    os << "ingest report\n";
    os << "patient_rows=" << patient_rows << "\n";
    os << "event_rows=" << event_rows << "\n";
    os << "events_kept=" << events_kept << "\n";
    os << "rejected_unknown_patient=" << rejected_unknown_patient << "\n";
    os << "rejected_unknown_kind=" << rejected_unknown_kind << "\n";
    os << "rejected_negative_rate_volume=" << rejected_negative_rate_volume << "\n";
    os << "plausible_range_warnings=" << range_warnings << "\n";
    os << "missing_by_column weight=" << missing_weight << " height=" << missing_height << "\n";
    return os.str();
  }
};

inline std::string patients_header() {
  std::string h = "patient_id,age,gender,ethnicity,weight,height,sofa";
  for (const auto& c : comorbidity_categories()) h += ",comorbidity_" + c;
  h += ",icu_admit,icu_discharge";
  return h;
}

inline constexpr const char* kEventsHeader =
    "patient_id,minute_offset,kind,value,rate,volume,fluid_class";

namespace detail {

[[noreturn]] inline void row_error(const std::string& path, size_t line_no,
                                   const std::string& what) {
  throw FbtError(path + ":" + std::to_string(line_no) + ": " + what);
}

inline double require_double(const std::string& cell, const std::string& path, size_t line_no,
                             const char* col) {
  double v;
  if (!parse_double(cell, v)) row_error(path, line_no, std::string("bad numeric value for ") + col + ": '" + cell + "'");
  return v;
}

}  // namespace detail

inline std::map<std::string, PatientRecord> load_patients(const std::string& path,
                                                          IngestReport* report = nullptr) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FbtError(path + ": empty patients file");
  if (lines[0] != patients_header())
    throw FbtError(path + ": patients header does not match expected column set");
  const size_t n_cmb = comorbidity_categories().size();
  const size_t n_cols = 7 + n_cmb + 2;

  std::map<std::string, PatientRecord> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split(lines[i], ',');
    if (cells.size() != n_cols)
      detail::row_error(path, i + 1, "expected " + std::to_string(n_cols) + " columns, got " +
                                         std::to_string(cells.size()));
    PatientRecord p;
    p.patient_id = cells[0];
    if (p.patient_id.empty()) detail::row_error(path, i + 1, "empty patient_id");
    if (out.count(p.patient_id))
      detail::row_error(path, i + 1, "duplicate patient_id: " + p.patient_id);
    p.age = detail::require_double(cells[1], path, i + 1, "age");
    if (p.age < 0) detail::row_error(path, i + 1, "negative age");
    if (!parse_gender(cells[2], p.gender))
      detail::row_error(path, i + 1, "bad gender: '" + cells[2] + "'");
    p.ethnicity = static_cast<int>(ethnicity_codes().size()) - 1;  // "other"
    for (size_t e = 0; e < ethnicity_codes().size(); ++e)
      if (cells[3] == ethnicity_codes()[e]) p.ethnicity = static_cast<int>(e);
    if (cells[4].empty()) {
      if (report) report->missing_weight++;
    } else {
      p.weight = detail::require_double(cells[4], path, i + 1, "weight");
      if (*p.weight < 0) detail::row_error(path, i + 1, "negative weight");
    }
    if (cells[5].empty()) {
      if (report) report->missing_height++;
    } else {
      p.height = detail::require_double(cells[5], path, i + 1, "height");
      if (*p.height < 0) detail::row_error(path, i + 1, "negative height");
    }
    int64_t sofa;
    if (!parse_int64(cells[6], sofa) || sofa < 0)
      detail::row_error(path, i + 1, "bad sofa: '" + cells[6] + "'");
    p.sofa_at_admission = static_cast<int>(sofa);
    p.comorbidity_flags.resize(n_cmb);
    for (size_t c = 0; c < n_cmb; ++c) {
      if (cells[7 + c] == "0")
        p.comorbidity_flags[c] = 0;
      else if (cells[7 + c] == "1")
        p.comorbidity_flags[c] = 1;
      else
        detail::row_error(path, i + 1, "bad comorbidity flag: '" + cells[7 + c] + "'");
    }
    if (!parse_int64(cells[7 + n_cmb], p.icu_admit_time))
      detail::row_error(path, i + 1, "bad icu_admit");
    if (!parse_int64(cells[8 + n_cmb], p.icu_discharge_time))
      detail::row_error(path, i + 1, "bad icu_discharge");
    if (p.icu_discharge_time <= p.icu_admit_time)
      detail::row_error(path, i + 1, "icu_discharge must be after icu_admit");
    if (report) report->patient_rows++;
    out.emplace(p.patient_id, std::move(p));
  }
  return out;
}

inline std::map<std::string, EventStream> load_events(
    const std::string& path, const std::map<std::string, PatientRecord>& patients,
    IngestReport* report = nullptr) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw FbtError(path + ": empty events file");
  if (lines[0] != kEventsHeader)
    throw FbtError(path + ": events header does not match expected column set");

  std::map<std::string, EventStream> out;
  for (const auto& [id, p] : patients) {
    EventStream s;
    s.patient_id = id;
    out.emplace(id, std::move(s));
  }

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split(lines[i], ',');
    if (cells.size() != 7)
      detail::row_error(path, i + 1, "expected 7 columns, got " + std::to_string(cells.size()));
    if (report) report->event_rows++;
    auto stream_it = out.find(cells[0]);
    if (stream_it == out.end()) {
      if (report) report->rejected_unknown_patient++;
      continue;
    }
    Event e;
    if (!parse_int64(cells[1], e.time))
      detail::row_error(path, i + 1, "bad minute_offset: '" + cells[1] + "'");
    if (!parse_kind(cells[2], e.kind)) {
      if (report) report->rejected_unknown_kind++;
      continue;
    }
    e.value = detail::require_double(cells[3], path, i + 1, "value");
    if (e.kind == EventKind::fluid_infusion) {
      e.rate = detail::require_double(cells[4], path, i + 1, "rate");
      e.volume = detail::require_double(cells[5], path, i + 1, "volume");
      if (e.rate < 0 || e.volume < 0) {
        if (report) report->rejected_negative_rate_volume++;
        continue;
      }
      if (cells[6] == "crystalloid")
        e.fluid_class = FluidClass::crystalloid;
      else if (cells[6] == "other")
        e.fluid_class = FluidClass::other;
      else
        detail::row_error(path, i + 1, "bad fluid_class: '" + cells[6] + "'");
    }
    if (report) {
      RawEvent raw;
      raw.kind = cells[2];
      raw.value = e.value;
      if (!validate_event(raw).ok()) report->range_warnings++;
      report->events_kept++;
    }
    stream_it->second.events.push_back(e);
  }

  for (auto& [id, stream] : out) {
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
  }
  return out;
}

inline Dataset load_dataset(const std::string& patients_path, const std::string& events_path,
                            IngestReport* report = nullptr) {
  Dataset ds;
  ds.patients = load_patients(patients_path, report);
  ds.streams = load_events(events_path, ds.patients, report);
  return ds;
}

// ---------------------------------------------------------------------------
// Serialization (also used by the synthetic generator). Writing then loading
// reproduces the Dataset exactly; numeric cells use %.17g.
// ---------------------------------------------------------------------------

inline std::string serialize_patients(const std::map<std::string, PatientRecord>& patients) {
  std::string s = patients_header() + "\n";
  for (const auto& [id, p] : patients) {
    s += id + "," + fmt_g17(p.age) + "," + gender_name(p.gender) + "," +
         ethnicity_codes()[p.ethnicity] + ",";
    s += (p.weight ? fmt_g17(*p.weight) : "") + std::string(",");
    s += (p.height ? fmt_g17(*p.height) : "") + std::string(",");
    s += std::to_string(p.sofa_at_admission);
    for (uint8_t f : p.comorbidity_flags) s += f ? ",1" : ",0";
    s += "," + std::to_string(p.icu_admit_time) + "," + std::to_string(p.icu_discharge_time) + "\n";
  }
  return s;
}

inline std::string serialize_events(const std::map<std::string, EventStream>& streams) {
  std::string s = std::string(kEventsHeader) + "\n";
  for (const auto& [id, stream] : streams) {
    for (const Event& e : stream.events) {
      s += id + "," + std::to_string(e.time) + "," + kind_name(e.kind) + "," + fmt_g17(e.value);
      if (e.kind == EventKind::fluid_infusion)
        s += "," + fmt_g17(e.rate) + "," + fmt_g17(e.volume) + "," + fluid_class_name(e.fluid_class);
      else
        s += ",,,";
      s += "\n";
    }
  }
  return s;
}

}  // namespace fbt
