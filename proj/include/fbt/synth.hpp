#pragma once

// Schema-compatible synthetic cohort generator with plantable predictive
// signal, so the full pipeline is testable without access-restricted data.
//
// signal_mode:
//   none          labels independent of all features (chance-level AUC)
//   static_sparse labels depend on exactly 5 named aggregated features
//                 (respiratory_rate, diastolic_bp, temperature, bicarbonate,
//                 base_excess at the FBT anchor)
//   temporal_late labels drive a heart-rate/MAP bump strictly inside
//                 (fbt-90, fbt-30) minutes: visible to the time-series
//                 setting, invisible to all three +/-30-minute anchors
//
// MAP trajectories are built backward from the outcome rule: the
// [fbt-30, fbt+10] window is generated first, its exact mean taken, and the
// post-FBT maximum placed above or below 1.15 x that mean to realize the
// intended label. The generator asserts label_episode agreement per patient.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "fbt/cohort.hpp"
#include "fbt/common.hpp"
#include "fbt/ingest.hpp"
#include "fbt/types.hpp"

namespace fbt {

enum class SignalMode { none, static_sparse, temporal_late };

inline const char* signal_mode_name(SignalMode m) {
  switch (m) {
    case SignalMode::none: return "none";
    case SignalMode::static_sparse: return "static_sparse";
    default: return "temporal_late";
  }
}

inline bool parse_signal_mode(const std::string& s, SignalMode& out) {
  for (SignalMode m : {SignalMode::none, SignalMode::static_sparse, SignalMode::temporal_late}) {
    if (s == signal_mode_name(m)) {
      out = m;
      return true;
    }
  }
  return false;
}

struct SynthConfig {
  size_t n_patients = 500;
  uint64_t seed = 1;
  SignalMode signal_mode = SignalMode::none;
  double signal_strength = 0.8;  // in [0, 1]
  double missingness = 0.1;
  double prevalence = 0.5;
};

struct SynthOutput {
  std::string patients_text;
  std::string events_text;
  std::string manifest_text;
};

// The five planted aggregated columns for static_sparse mode.
inline const std::vector<std::string>& planted_static_columns() {
  static const std::vector<std::string> c = {
      "respiratory_rate@t0", "diastolic_bp@t0", "temperature@t0", "bicarbonate@t0",
      "base_excess@t0"};
  return c;
}

constexpr int64_t kPlantedWindowLo = -90;  // relative to FBT start, open interval
constexpr int64_t kPlantedWindowHi = -30;

namespace synth_detail {

struct PatientDraft {
  PatientRecord record;
  std::vector<Event> events;
  int64_t fbt_start = 0;
  double map_base = 0.0;
  bool edge_case = false;
  ExclusionReason expected_exclusion = ExclusionReason::none;
  int label = -1;
  double planted_level[5] = {0, 0, 0, 0, 0};  // static_sparse region levels at t0
  Rng rng{0};
};

struct KindSpec {
  EventKind kind;
  double lo, hi;     // base level draw
  double walk_sigma; // per-observation jitter
};

inline void add_event(PatientDraft& p, int64_t t, EventKind k, double v) {
  Event e;
  e.time = t;
  e.kind = k;
  e.value = v;
  p.events.push_back(e);
}

inline void add_fluid(PatientDraft& p, int64_t t, double rate, double volume, FluidClass cls) {
  Event e;
  e.time = t;
  e.kind = EventKind::fluid_infusion;
  e.value = volume;
  e.rate = rate;
  e.volume = volume;
  e.fluid_class = cls;
  p.events.push_back(e);
}

// Piecewise region level for planted vitals/labs: independent draws near each
// aggregation anchor so columns at different anchors are uncorrelated.
inline double region_level(int64_t rel, double base, double lvl360, double lvl120, double lvl0) {
  if (rel >= -405 && rel <= -315) return lvl360;
  if (rel >= -165 && rel <= -75) return lvl120;
  if (rel >= -45 && rel <= 45) return lvl0;
  return base;
}

}  // namespace synth_detail

inline SynthOutput generate_synthetic(const SynthConfig& cfg) {
  using synth_detail::PatientDraft;
  if (cfg.n_patients < 10) throw FbtError("synthetic generation needs n_patients >= 10");
  if (!(cfg.prevalence > 0.0 && cfg.prevalence < 1.0))
    throw FbtError("infeasible prevalence target: " + fmt_g(cfg.prevalence, 6));

  const bool inject_edges = cfg.n_patients >= 400;
  const size_t n_edges = inject_edges ? 4 : 0;
  const size_t n_included = cfg.n_patients - n_edges;
  const size_t n_success =
      static_cast<size_t>(std::llround(cfg.prevalence * static_cast<double>(n_included)));
  if (n_success < 1 || n_success >= n_included)
    throw FbtError("infeasible prevalence target: " + fmt_g(cfg.prevalence, 6) + " with " +
                   std::to_string(n_included) + " eligible patients");

  std::vector<PatientDraft> drafts(cfg.n_patients);

  // pass A: demographics, baselines, pre-outcome events
  for (size_t i = 0; i < cfg.n_patients; ++i) {
    PatientDraft& p = drafts[i];
    p.rng = Rng(derive_seed(cfg.seed, 1000 + i));
    Rng& rng = p.rng;
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "p%06zu", i);
    PatientRecord& r = p.record;
    r.patient_id = idbuf;
    // chart-style precision: integer years, 0.5 kg, whole centimeters
    r.age = std::floor(25.0 + rng.uniform() * 65.0);
    r.gender = rng.bernoulli(0.5) ? Gender::male : Gender::female;
    {
      const double u = rng.uniform();
      r.ethnicity = u < 0.6 ? 0 : u < 0.75 ? 1 : u < 0.85 ? 2 : u < 0.9 ? 3 : 4;
    }
    if (!rng.bernoulli(cfg.missingness * 0.3))
      r.weight = std::round(std::clamp(80.0 + rng.normal() * 15.0, 40.0, 180.0) * 2.0) / 2.0;
    if (!rng.bernoulli(cfg.missingness * 0.3))
      r.height = std::round(std::clamp(170.0 + rng.normal() * 10.0, 140.0, 210.0));
    r.sofa_at_admission = static_cast<int>(rng.below(16));
    r.comorbidity_flags.resize(comorbidity_categories().size());
    for (auto& f : r.comorbidity_flags) f = rng.bernoulli(0.15) ? 1 : 0;
    r.icu_admit_time = 0;
    p.fbt_start = 400 + static_cast<int64_t>(rng.below(981));
    r.icu_discharge_time = p.fbt_start + 600 + static_cast<int64_t>(rng.below(1400));
    p.map_base = 50.0 + rng.uniform() * 13.0;

    const size_t edge_index = inject_edges && i >= n_included ? i - n_included : 4;
    if (edge_index < 4) {
      p.edge_case = true;
      switch (edge_index) {
        case 0:
          r.age = 17.5;
          p.expected_exclusion = ExclusionReason::under_18;
          break;
        case 1:
          r.icu_discharge_time = 660;  // 11 hour stay
          p.fbt_start = 500;
          p.expected_exclusion = ExclusionReason::stay_lt_12h;
          break;
        case 2:
          p.expected_exclusion = ExclusionReason::no_fbt_in_24h;
          break;
        case 3:
          p.map_base = 70.0;  // not hypotensive at FBT start
          p.expected_exclusion = ExclusionReason::not_hypotensive;
          break;
      }
    }

    const int64_t fbt = p.fbt_start;

    // vitals every 5 minutes over the feature horizon; heart rate gets a
    // deliberately narrow base range so the temporal_late bump dominates the
    // column once planted
    static const synth_detail::KindSpec vitals[] = {
        {EventKind::heart_rate, 75, 95, 1.5},
        {EventKind::respiratory_rate, 10, 28, 0.5},
        {EventKind::temperature, 36.0, 38.5, 0.05},
        {EventKind::oxygen_saturation, 90, 100, 0.5},
        {EventKind::systolic_bp, 85, 130, 2.0},
        {EventKind::diastolic_bp, 45, 80, 1.0},
    };
    const bool plant_static = cfg.signal_mode == SignalMode::static_sparse && !p.edge_case;
    for (const auto& spec : vitals) {
      const double base = spec.lo + rng.uniform() * (spec.hi - spec.lo);
      double lvl360 = base, lvl120 = base, lvl0 = base;
      int planted_slot = -1;
      if (plant_static) {
        if (spec.kind == EventKind::respiratory_rate) planted_slot = 0;
        if (spec.kind == EventKind::diastolic_bp) planted_slot = 1;
        if (spec.kind == EventKind::temperature) planted_slot = 2;
      }
      if (planted_slot >= 0) {
        lvl360 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        lvl120 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        lvl0 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        p.planted_level[planted_slot] = lvl0;
      }
      // slow mean-reverting wander keeps bins informative about time, not
      // just about the patient
      const double wander_sd = 0.18 * (spec.hi - spec.lo);
      double wander = rng.normal() * wander_sd;
      for (int64_t rel = -400; rel <= 35; rel += 5) {
        wander = 0.92 * wander + rng.normal() * wander_sd * 0.39;
        if (rng.bernoulli(cfg.missingness * 0.5)) continue;
        double level = synth_detail::region_level(rel, base, lvl360, lvl120, lvl0);
        if (planted_slot < 0) level += wander;
        synth_detail::add_event(p, fbt + rel, spec.kind,
                                level + rng.normal() * spec.walk_sigma);
      }
    }

    // labs hourly, anchored so every +/-30 minute window holds a sample
    static const synth_detail::KindSpec labs[] = {
        {EventKind::ph, 7.25, 7.45, 0.01},
        {EventKind::pao2, 70, 150, 3.0},
        {EventKind::paco2, 30, 50, 1.0},
        {EventKind::bicarbonate, 18, 28, 0.3},
        {EventKind::base_excess, -6, 4, 0.3},
        {EventKind::lactate, 0.8, 4.0, 0.1},
        {EventKind::sodium, 133, 145, 0.5},
        {EventKind::potassium, 3.3, 5.0, 0.05},
        {EventKind::chloride, 95, 110, 0.5},
    };
    for (const auto& spec : labs) {
      const double base = spec.lo + rng.uniform() * (spec.hi - spec.lo);
      double lvl360 = base, lvl120 = base, lvl0 = base;
      int planted_slot = -1;
      if (plant_static) {
        if (spec.kind == EventKind::bicarbonate) planted_slot = 3;
        if (spec.kind == EventKind::base_excess) planted_slot = 4;
      }
      if (planted_slot >= 0) {
        lvl360 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        lvl120 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        lvl0 = spec.lo + rng.uniform() * (spec.hi - spec.lo);
        p.planted_level[planted_slot] = lvl0;
      }
      const double wander_sd = 0.15 * (spec.hi - spec.lo);
      double wander = rng.normal() * wander_sd;
      for (int64_t rel = -370; rel <= -10; rel += 60) {
        wander = 0.8 * wander + rng.normal() * wander_sd * 0.6;
        const bool anchor_sample = rel == -370 || rel == -130 || rel == -10;
        if (planted_slot < 0 && !anchor_sample && rng.bernoulli(cfg.missingness)) continue;
        if (planted_slot < 0 && anchor_sample && rng.bernoulli(cfg.missingness * 0.5)) continue;
        double level = synth_detail::region_level(rel, base, lvl360, lvl120, lvl0);
        if (planted_slot < 0) level += wander;
        synth_detail::add_event(p, fbt + rel, spec.kind,
                                level + rng.normal() * spec.walk_sigma);
      }
    }

    // vasopressors for a minority of patients; absence means not administered
    if (rng.bernoulli(0.3)) {
      const double base = 0.05 + rng.uniform() * 0.45;
      for (int64_t rel = -360; rel <= 120; rel += 30)
        synth_detail::add_event(p, fbt + rel, EventKind::norepinephrine_rate,
                                std::max(0.0, base + rng.normal() * 0.02));
    }
    if (rng.bernoulli(0.1)) {
      const double base = 0.5 + rng.uniform() * 2.0;
      for (int64_t rel = -360; rel <= 120; rel += 30)
        synth_detail::add_event(p, fbt + rel, EventKind::vasopressin_rate,
                                std::max(0.0, base + rng.normal() * 0.1));
    }

    for (int64_t rel = -360; rel <= 60; rel += 60)
      synth_detail::add_event(p, fbt + rel, EventKind::urine_output, 10.0 + rng.uniform() * 110.0);

    // pre-FBT MAP: descend from a normotensive start to the hypotensive base
    const int64_t descent_end = -60;
    const double map_start = 68.0 + rng.uniform() * 12.0;
    for (int64_t rel = -400; rel <= 0; rel += 5) {
      double level;
      if (rel <= descent_end) {
        const double frac = static_cast<double>(rel + 400) / static_cast<double>(400 + descent_end);
        level = map_start + (p.map_base - map_start) * frac;
      } else {
        level = p.map_base;
      }
      synth_detail::add_event(p, fbt + rel, EventKind::mean_arterial_pressure,
                              level + (rng.uniform() * 3.0 - 1.5));
    }

    // infusions: sub-threshold maintenance, an occasional non-crystalloid
    // bolus, and the qualifying FBT itself
    if (rng.bernoulli(0.5))
      synth_detail::add_fluid(p, fbt - 300, 50.0 + rng.uniform() * 150.0,
                              50.0 + rng.uniform() * 150.0, FluidClass::crystalloid);
    if (rng.bernoulli(0.2))
      synth_detail::add_fluid(p, fbt - 200, 400.0 + rng.uniform() * 200.0,
                              400.0 + rng.uniform() * 200.0, FluidClass::other);
    if (p.expected_exclusion != ExclusionReason::no_fbt_in_24h)
      synth_detail::add_fluid(p, fbt, 300.0 + rng.uniform() * 700.0,
                              300.0 + rng.uniform() * 700.0, FluidClass::crystalloid);
  }

  // pass B: label assignment
  std::vector<size_t> eligible;
  for (size_t i = 0; i < cfg.n_patients; ++i)
    if (!drafts[i].edge_case) eligible.push_back(i);

  if (cfg.signal_mode == SignalMode::static_sparse) {
    // score from standardized planted levels, weights +1 -1 +1 -1 +1
    double mean[5] = {0, 0, 0, 0, 0}, var[5] = {0, 0, 0, 0, 0};
    for (size_t i : eligible)
      for (int j = 0; j < 5; ++j) mean[j] += drafts[i].planted_level[j];
    for (int j = 0; j < 5; ++j) mean[j] /= static_cast<double>(eligible.size());
    for (size_t i : eligible)
      for (int j = 0; j < 5; ++j) {
        const double d = drafts[i].planted_level[j] - mean[j];
        var[j] += d * d;
      }
    for (int j = 0; j < 5; ++j)
      var[j] = std::max(var[j] / static_cast<double>(eligible.size()), 1e-12);
    Rng noise_rng(derive_seed(cfg.seed, 0x51a7));
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i : eligible) {
      double score = 0.0;
      for (int j = 0; j < 5; ++j) {
        const double z = (drafts[i].planted_level[j] - mean[j]) / std::sqrt(var[j]);
        score += (j % 2 == 0 ? 1.0 : -1.0) * z;
      }
      score += noise_rng.normal() * 2.0 * (1.0 - cfg.signal_strength);
      scored.emplace_back(score, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (size_t k = 0; k < scored.size(); ++k)
      drafts[scored[k].second].label = k < n_success ? 1 : 0;
  } else {
    // exact allocation via a seeded shuffle
    std::vector<size_t> order = eligible;
    Rng alloc_rng(derive_seed(cfg.seed, 0x1ab));
    alloc_rng.shuffle(order);
    for (size_t k = 0; k < order.size(); ++k) drafts[order[k]].label = k < n_success ? 1 : 0;
  }

  // pass C: temporal bump and outcome-consistent post-FBT MAP
  for (PatientDraft& p : drafts) {
    Rng& rng = p.rng;
    const int64_t fbt = p.fbt_start;
    if (cfg.signal_mode == SignalMode::temporal_late && !p.edge_case) {
      const double sign = p.label == 1 ? 1.0 : -1.0;
      for (Event& e : p.events) {
        const int64_t rel = e.time - fbt;
        if (rel <= kPlantedWindowLo || rel >= kPlantedWindowHi) continue;
        const double shape =
            std::sin(M_PI * static_cast<double>(rel - kPlantedWindowLo) /
                     static_cast<double>(kPlantedWindowHi - kPlantedWindowLo));
        if (e.kind == EventKind::heart_rate)
          e.value += sign * 24.0 * cfg.signal_strength * shape;
        else if (e.kind == EventKind::mean_arterial_pressure)
          e.value += sign * 14.0 * cfg.signal_strength * shape;
      }
    }

    if (p.expected_exclusion == ExclusionReason::no_fbt_in_24h) continue;

    // exact mean of the generated [fbt-30, fbt+10] MAP observations; the +5
    // and +10 observations are appended first
    for (int64_t rel = 5; rel <= 10; rel += 5)
      synth_detail::add_event(p, fbt + rel, EventKind::mean_arterial_pressure,
                              p.map_base + (rng.uniform() * 3.0 - 1.5));
    double sum = 0.0;
    size_t count = 0;
    for (const Event& e : p.events) {
      if (e.kind != EventKind::mean_arterial_pressure) continue;
      if (e.time >= fbt - kOutcomeAvgBeforeMin && e.time <= fbt + kOutcomeAvgAfterMin) {
        sum += e.value;
        ++count;
      }
    }
    const double avg_all = sum / static_cast<double>(count);
    const double threshold = kSuccessRatio * avg_all;

    const bool success = p.label == 1;
    const int64_t peak = fbt + 20 + 5 * static_cast<int64_t>(rng.below(21));  // in [+20, +120]
    const double peak_val = success ? threshold * (1.02 + rng.uniform() * 0.18) : 0.0;
    for (int64_t rel = 15; rel <= 120; rel += 5) {
      double v;
      if (success) {
        const double shape =
            std::exp(-std::abs(static_cast<double>(fbt + rel - peak)) / 40.0);
        v = fbt + rel == peak ? peak_val
                              : p.map_base + (peak_val - p.map_base) * shape * 0.9;
      } else {
        v = std::min(p.map_base + (rng.uniform() * 3.0 - 1.5), threshold - 2.0);
      }
      synth_detail::add_event(p, fbt + rel, EventKind::mean_arterial_pressure, v);
    }
  }

  // assemble dataset; verify labeler consistency by construction
  Dataset ds;
  for (PatientDraft& p : drafts) {
    EventStream s;
    s.patient_id = p.record.patient_id;
    std::stable_sort(p.events.begin(), p.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    s.events = std::move(p.events);
    if (!p.edge_case) {
      const LabelResult lr = label_episode(s, p.fbt_start);
      const int got = lr == LabelResult::success ? 1 : lr == LabelResult::failure ? 0 : -1;
      if (got != p.label)
        throw FbtError("internal: generated stream disagrees with intended label for " +
                       p.record.patient_id);
    }
    ds.patients.emplace(p.record.patient_id, p.record);
    ds.streams.emplace(s.patient_id, std::move(s));
  }

  SynthOutput out;
  out.patients_text = serialize_patients(ds.patients);
  out.events_text = serialize_events(ds.streams);

  std::string m = "# fbt-synth-manifest v1\n";
  m += "# n_patients=" + std::to_string(cfg.n_patients) + " seed=" + std::to_string(cfg.seed) +
       "\n";
  m += "# signal_mode=" + std::string(signal_mode_name(cfg.signal_mode)) +
       " signal_strength=" + fmt_g(cfg.signal_strength, 6) +
       " prevalence=" + fmt_g(cfg.prevalence, 6) +
       " missingness=" + fmt_g(cfg.missingness, 6) + "\n";
  if (cfg.signal_mode == SignalMode::static_sparse)
    for (const auto& c : planted_static_columns()) m += "# planted_feature=" + c + "\n";
  if (cfg.signal_mode == SignalMode::temporal_late)
    m += "# planted_window_minutes=" + std::to_string(kPlantedWindowLo) + ":" +
         std::to_string(kPlantedWindowHi) + "\n";
  m += "patient_id\ttrue_label\texpected_excluded\n";
  std::map<std::string, const PatientDraft*> by_id;
  for (const auto& p : drafts) by_id.emplace(p.record.patient_id, &p);
  for (const auto& [id, p] : by_id) {
    m += id + "\t";
    m += p->edge_case ? "" : std::to_string(p->label);
    m += "\t";
    m += p->edge_case ? exclusion_reason_name(p->expected_exclusion) : "";
    m += "\n";
  }
  out.manifest_text = m;
  return out;
}

}  // namespace fbt
