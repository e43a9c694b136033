#pragma once

// Feature schema: the closed event vocabulary, units, plausible ranges, and
// the fixed, versioned feature ordering used by every downstream stage.
//
// Named-feature enumeration (29 total):
//   6 demographics (age, gender, ethnicity, weight, height, sofa)
//   1 comorbidity block (Elixhauser categories, ingested as binary flags)
//   22 time-varying kinds (8 vitals, 9 labs, 5 vasopressor rates)
// The comorbidity block counts as one named feature; it expands to one column
// per category in feature matrices, as do the gender/ethnicity one-hots.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fbt/common.hpp"

namespace fbt {

constexpr int kSchemaVersion = 1;

enum class EventKind : int {
  heart_rate = 0,
  respiratory_rate,
  temperature,
  oxygen_saturation,
  systolic_bp,
  diastolic_bp,
  mean_arterial_pressure,
  urine_output,
  ph,
  pao2,
  paco2,
  bicarbonate,
  base_excess,
  lactate,
  sodium,
  potassium,
  chloride,
  norepinephrine_rate,
  epinephrine_rate,
  phenylephrine_rate,
  vasopressin_rate,
  dopamine_rate,
  fluid_infusion,
};

constexpr int kNumEventKinds = 23;
constexpr int kNumTimevaryingKinds = 22;  // everything except fluid_infusion

struct KindInfo {
  const char* name;
  const char* unit;
  double lo;  // plausible range, validation warnings only
  double hi;
  bool absent_means_zero;  // vasopressor rates: no event = not administered
};

inline const std::array<KindInfo, kNumEventKinds>& kind_table() {
  static const std::array<KindInfo, kNumEventKinds> t = {{
      {"heart_rate", "bpm", 0.0, 300.0, false},
      {"respiratory_rate", "breaths/min", 0.0, 80.0, false},
      {"temperature", "degC", 25.0, 45.0, false},
      {"oxygen_saturation", "percent", 0.0, 100.0, false},
      {"systolic_bp", "mmHg", 0.0, 300.0, false},
      {"diastolic_bp", "mmHg", 0.0, 225.0, false},
      {"mean_arterial_pressure", "mmHg", 0.0, 250.0, false},
      {"urine_output", "ml", 0.0, 2000.0, false},
      {"ph", "pH", 6.5, 8.0, false},
      {"pao2", "mmHg", 0.0, 700.0, false},
      {"paco2", "mmHg", 0.0, 250.0, false},
      {"bicarbonate", "mEq/L", 0.0, 60.0, false},
      {"base_excess", "mEq/L", -40.0, 40.0, false},
      {"lactate", "mmol/L", 0.0, 30.0, false},
      {"sodium", "mEq/L", 100.0, 180.0, false},
      {"potassium", "mEq/L", 0.0, 12.0, false},
      {"chloride", "mEq/L", 60.0, 150.0, false},
      {"norepinephrine_rate", "mcg/kg/min", 0.0, 5.0, true},
      {"epinephrine_rate", "mcg/kg/min", 0.0, 5.0, true},
      {"phenylephrine_rate", "mcg/kg/min", 0.0, 20.0, true},
      {"vasopressin_rate", "units/hr", 0.0, 10.0, true},
      {"dopamine_rate", "mcg/kg/min", 0.0, 50.0, true},
      {"fluid_infusion", "ml", 0.0, 5000.0, false},
  }};
  return t;
}

inline const char* kind_name(EventKind k) { return kind_table()[static_cast<int>(k)].name; }

inline bool parse_kind(const std::string& s, EventKind& out) {
  for (int i = 0; i < kNumEventKinds; ++i) {
    if (s == kind_table()[i].name) {
      out = static_cast<EventKind>(i);
      return true;
    }
  }
  return false;
}

inline const std::array<const char*, 5>& ethnicity_codes() {
  static const std::array<const char*, 5> e = {"white", "black", "hispanic", "asian", "other"};
  return e;
}

// Elixhauser comorbidity categories, fixed order (31 categories).
inline const std::vector<std::string>& comorbidity_categories() {
  static const std::vector<std::string> c = {
      "congestive_heart_failure", "cardiac_arrhythmias", "valvular_disease",
      "pulmonary_circulation", "peripheral_vascular", "hypertension_uncomplicated",
      "hypertension_complicated", "paralysis", "other_neurological",
      "chronic_pulmonary", "diabetes_uncomplicated", "diabetes_complicated",
      "hypothyroidism", "renal_failure", "liver_disease", "peptic_ulcer",
      "aids_hiv", "lymphoma", "metastatic_cancer", "solid_tumor",
      "rheumatoid_arthritis", "coagulopathy", "obesity", "weight_loss",
      "fluid_electrolyte", "blood_loss_anemia", "deficiency_anemia",
      "alcohol_abuse", "drug_abuse", "psychoses", "depression"};
  return c;
}

struct StaticRange {
  const char* name;
  const char* unit;
  double lo;
  double hi;
};

inline const std::array<StaticRange, 4>& static_ranges() {
  static const std::array<StaticRange, 4> r = {{
      {"age", "years", 0.0, 120.0},
      {"weight", "kg", 0.0, 400.0},
      {"height", "cm", 0.0, 260.0},
      {"sofa", "score", 0.0, 24.0},
  }};
  return r;
}

// Anchor offsets (minutes before FBT start) for the time-aggregated setting.
inline const std::array<int64_t, 3>& anchor_offsets() {
  static const std::array<int64_t, 3> a = {-360, -120, 0};
  return a;
}

inline const std::array<const char*, 3>& anchor_suffixes() {
  static const std::array<const char*, 3> s = {"@m360", "@m120", "@t0"};
  return s;
}

class FeatureSchema {
 public:
  static const FeatureSchema& instance() {
    static FeatureSchema s;
    return s;
  }

  // The 29 named features, in schema order.
  const std::vector<std::string>& named_features() const { return named_; }

  // Expanded static columns: age, gender one-hot, ethnicity one-hot, weight,
  // height, sofa, one column per comorbidity category.
  const std::vector<std::string>& static_columns() const { return static_cols_; }

  // The 22 time-varying kinds in schema order.
  const std::vector<EventKind>& timevarying_kinds() const { return tv_kinds_; }

  // Columns of the time-aggregated vector: static block, then for each anchor
  // every time-varying kind except mean_arterial_pressure.
  const std::vector<std::string>& aggregated_columns() const { return agg_cols_; }

  // Columns of one time-series row: static block, then all 22 kinds.
  const std::vector<std::string>& series_columns() const { return series_cols_; }

  size_t static_dim() const { return static_cols_.size(); }
  size_t aggregated_dim() const { return agg_cols_.size(); }
  size_t series_dim() const { return series_cols_.size(); }

  int column_index_aggregated(const std::string& name) const {
    for (size_t i = 0; i < agg_cols_.size(); ++i)
      if (agg_cols_[i] == name) return static_cast<int>(i);
    return -1;
  }

  // Key-value schema file pinning order, units, and plausible ranges.
  std::string schema_file_text() const;

 private:
  FeatureSchema() {
    named_ = {"age", "gender", "ethnicity", "weight", "height", "sofa_at_admission",
              "elixhauser_comorbidities"};
    for (int i = 0; i < kNumTimevaryingKinds; ++i)
      named_.emplace_back(kind_table()[i].name);

    static_cols_ = {"age", "gender_male", "gender_female"};
    for (const char* e : ethnicity_codes()) static_cols_.push_back(std::string("eth_") + e);
    static_cols_.push_back("weight");
    static_cols_.push_back("height");
    static_cols_.push_back("sofa");
    for (const auto& c : comorbidity_categories()) static_cols_.push_back("cmb_" + c);

    for (int i = 0; i < kNumTimevaryingKinds; ++i) tv_kinds_.push_back(static_cast<EventKind>(i));

    agg_cols_ = static_cols_;
    for (size_t a = 0; a < anchor_offsets().size(); ++a) {
      for (EventKind k : tv_kinds_) {
        if (k == EventKind::mean_arterial_pressure) continue;
        agg_cols_.push_back(std::string(kind_name(k)) + anchor_suffixes()[a]);
      }
    }

    series_cols_ = static_cols_;
    for (EventKind k : tv_kinds_) series_cols_.emplace_back(kind_name(k));
  }

  std::vector<std::string> named_;
  std::vector<std::string> static_cols_;
  std::vector<EventKind> tv_kinds_;
  std::vector<std::string> agg_cols_;
  std::vector<std::string> series_cols_;
};

inline std::string FeatureSchema::schema_file_text() const {
  std::string s;
  s += "schema_version=" + std::to_string(kSchemaVersion) + "\n";
  s += "named_feature_count=" + std::to_string(named_.size()) + "\n";
  s += "# enumeration: 6 demographics + 1 comorbidity block + 22 time-varying kinds\n";
  s += "# the comorbidity block counts as one named feature and expands to " +
       std::to_string(comorbidity_categories().size()) + " flag columns\n";
  for (const auto& r : static_ranges()) {
    s += std::string("static ") + r.name + " unit=" + r.unit + " range=" + fmt_g(r.lo, 6) + ":" +
         fmt_g(r.hi, 6) + "\n";
  }
  s += "static gender categories=male,female encoding=one_hot\n";
  s += "static ethnicity categories=";
  for (size_t i = 0; i < ethnicity_codes().size(); ++i)
    s += std::string(i ? "," : "") + ethnicity_codes()[i];
  s += " encoding=one_hot\n";
  s += "static comorbidity categories=";
  const auto& cats = comorbidity_categories();
  for (size_t i = 0; i < cats.size(); ++i) s += (i ? "," : "") + cats[i];
  s += " encoding=binary_flags\n";
  for (int i = 0; i < kNumTimevaryingKinds; ++i) {
    const auto& k = kind_table()[i];
    s += std::string("timevarying ") + k.name + " unit=" + k.unit + " range=" + fmt_g(k.lo, 6) +
         ":" + fmt_g(k.hi, 6) + (k.absent_means_zero ? " absent=zero" : " absent=missing") + "\n";
  }
  s += "event fluid_infusion unit=ml rate_unit=ml/hr classes=crystalloid,other\n";
  s += "aggregated_anchors_minutes=-360,-120,0 window_minutes=30\n";
  s += "aggregated_excludes=mean_arterial_pressure\n";
  s += "aggregated_dim=" + std::to_string(agg_cols_.size()) + "\n";
  s += "series_dim=" + std::to_string(series_cols_.size()) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Event validation. Violations are data, not faults: callers decide whether a
// violation rejects the event (unknown kind, negative rate/volume) or only
// warns (out-of-plausible-range values are kept, never clipped).
// ---------------------------------------------------------------------------

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Raw, pre-vocabulary form of an event as it appears in an input file.
struct RawEvent {
  std::string kind;
  double value = 0.0;
  bool has_rate = false;
  double rate = 0.0;
  bool has_volume = false;
  double volume = 0.0;
};

inline ValidationResult validate_event(const RawEvent& e) {
  ValidationResult r;
  EventKind k;
  if (!parse_kind(e.kind, k)) {
    r.violations.push_back("unknown kind: " + e.kind);
    return r;
  }
  const auto& info = kind_table()[static_cast<int>(k)];
  if (e.value < info.lo)
    r.violations.push_back(std::string(info.name) + "=" + fmt_g(e.value, 6) +
                           " below plausible range [" + fmt_g(info.lo, 6) + "," +
                           fmt_g(info.hi, 6) + "]");
  else if (e.value > info.hi)
    r.violations.push_back(std::string(info.name) + "=" + fmt_g(e.value, 6) +
                           " above plausible range [" + fmt_g(info.lo, 6) + "," +
                           fmt_g(info.hi, 6) + "]");
  if (k == EventKind::fluid_infusion) {
    if (e.has_rate && e.rate < 0.0) r.violations.push_back("negative rate");
    if (e.has_volume && e.volume < 0.0) r.violations.push_back("negative volume");
  }
  return r;
}

}  // namespace fbt
