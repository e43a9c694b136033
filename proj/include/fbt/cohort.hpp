#pragma once

// Cohort selection and outcome labeling.
//
// Inclusion, applied in order: age > 18 years, ICU stay > 12 h, a first
// qualifying FBT within the first 24 h (crystalloid, rate > 248 ml/hr and
// volume > 248 ml, both strict), and hypotension at FBT start (most recent
// MAP at or before fbt_start within a 60-minute lookback, <= 65 mmHg).
// First-ICU-stay filtering is assumed done upstream by the data provider.
//
// Outcome: success iff max MAP in [fbt_start, fbt_start+120] is strictly
// greater than 1.15 x mean MAP in [fbt_start-30, fbt_start+10]. Window
// boundaries are closed; minute-resolution timestamps make this exact.

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fbt/common.hpp"
#include "fbt/ingest.hpp"
#include "fbt/types.hpp"

namespace fbt {

constexpr double kFbtRateThreshold = 248.0;    // ml/hr, strict
constexpr double kFbtVolumeThreshold = 248.0;  // ml, strict
constexpr double kHypotensionMap = 65.0;       // mmHg, inclusive
constexpr int64_t kFbtSearchWindowMin = 24 * 60;
constexpr int64_t kMapLookbackMin = 60;  // LOCF cap for MAP at FBT start
constexpr int64_t kOutcomeMaxWindowMin = 120;
constexpr int64_t kOutcomeAvgBeforeMin = 30;
constexpr int64_t kOutcomeAvgAfterMin = 10;
constexpr double kSuccessRatio = 1.15;

struct FbtDetection {
  int64_t fbt_start = 0;
  double rate = 0.0;
  double volume = 0.0;
};

// Earliest crystalloid infusion exceeding both thresholds within
// [admit, admit + 24h]. The stream is time-sorted, so the first hit wins.
inline std::optional<FbtDetection> detect_first_fbt(const EventStream& stream,
                                                    int64_t icu_admit_time) {
  for (const Event& e : stream.events) {
    if (e.time < icu_admit_time) continue;
    if (e.time > icu_admit_time + kFbtSearchWindowMin) break;
    if (e.kind != EventKind::fluid_infusion) continue;
    if (e.fluid_class != FluidClass::crystalloid) continue;
    if (e.rate > kFbtRateThreshold && e.volume > kFbtVolumeThreshold)
      return FbtDetection{e.time, e.rate, e.volume};
  }
  return std::nullopt;
}

// Most recent MAP observation at or before `at`, no older than the lookback
// cap. Within a minute, the last observation in stream order wins.
inline std::optional<double> map_at(const EventStream& stream, int64_t at,
                                    int64_t lookback = kMapLookbackMin) {
  std::optional<double> found;
  for (const Event& e : stream.events) {
    if (e.time > at) break;
    if (e.kind != EventKind::mean_arterial_pressure) continue;
    if (at - e.time <= lookback) found = e.value;
  }
  return found;
}

enum class LabelResult { success, failure, insufficient_map_data };

// Applies the outcome rule. Means accumulate in chronological order.
inline LabelResult label_episode(const EventStream& stream, int64_t fbt_start) {
  double avg_sum = 0.0;
  size_t avg_count = 0;
  double max_fbt = 0.0;
  bool have_max = false;
  for (const Event& e : stream.events) {
    if (e.kind != EventKind::mean_arterial_pressure) continue;
    if (e.time >= fbt_start - kOutcomeAvgBeforeMin && e.time <= fbt_start + kOutcomeAvgAfterMin) {
      avg_sum += e.value;
      ++avg_count;
    }
    if (e.time >= fbt_start && e.time <= fbt_start + kOutcomeMaxWindowMin) {
      if (!have_max || e.value > max_fbt) max_fbt = e.value;
      have_max = true;
    }
  }
  if (avg_count == 0 || !have_max) return LabelResult::insufficient_map_data;
  const double avg_all = avg_sum / static_cast<double>(avg_count);
  return max_fbt > kSuccessRatio * avg_all ? LabelResult::success : LabelResult::failure;
}

inline FbtEpisode evaluate_patient(const PatientRecord& p, const EventStream& stream,
                                   int64_t map_lookback = kMapLookbackMin) {
  FbtEpisode ep;
  ep.patient_id = p.patient_id;
  if (!(p.age > 18.0)) {
    ep.exclusion_reason = ExclusionReason::under_18;
    return ep;
  }
  if (!(p.stay_minutes() > 12 * 60)) {
    ep.exclusion_reason = ExclusionReason::stay_lt_12h;
    return ep;
  }
  auto fbt = detect_first_fbt(stream, p.icu_admit_time);
  if (!fbt) {
    ep.exclusion_reason = ExclusionReason::no_fbt_in_24h;
    return ep;
  }
  ep.fbt_start = fbt->fbt_start;
  ep.fbt_rate = fbt->rate;
  ep.fbt_volume = fbt->volume;
  auto map0 = map_at(stream, fbt->fbt_start, map_lookback);
  if (!map0) {
    ep.exclusion_reason = ExclusionReason::insufficient_map_data;
    return ep;
  }
  ep.map_at_start = *map0;
  if (!(*map0 <= kHypotensionMap)) {
    ep.exclusion_reason = ExclusionReason::not_hypotensive;
    return ep;
  }
  switch (label_episode(stream, fbt->fbt_start)) {
    case LabelResult::success:
      ep.label = 1;
      ep.included = true;
      break;
    case LabelResult::failure:
      ep.label = 0;
      ep.included = true;
      break;
    case LabelResult::insufficient_map_data:
      ep.exclusion_reason = ExclusionReason::insufficient_map_data;
      break;
  }
  return ep;
}

// One episode per patient, ordered by patient_id; order-independent of input.
inline std::vector<FbtEpisode> select_cohort(const Dataset& ds,
                                             int64_t map_lookback = kMapLookbackMin) {
  std::vector<FbtEpisode> out;
  out.reserve(ds.patients.size());
  static const EventStream kEmpty{};
  for (const auto& [id, p] : ds.patients) {
    auto it = ds.streams.find(id);
    out.push_back(
        evaluate_patient(p, it == ds.streams.end() ? kEmpty : it->second, map_lookback));
  }
  return out;
}

inline std::vector<const FbtEpisode*> included_episodes(const std::vector<FbtEpisode>& eps) {
  std::vector<const FbtEpisode*> out;
  for (const auto& e : eps)
    if (e.included) out.push_back(&e);
  return out;
}

// ---------------------------------------------------------------------------
// Reports and episode file
// ---------------------------------------------------------------------------

inline std::string cohort_report_text(const std::vector<FbtEpisode>& eps) {
  size_t included = 0, success = 0, failure = 0;
  size_t excl[6] = {0, 0, 0, 0, 0, 0};
  std::vector<double> rates, volumes, starts;
  for (const auto& e : eps) {
    if (e.included) {
      ++included;
      (e.label == 1 ? success : failure)++;
      rates.push_back(e.fbt_rate);
      volumes.push_back(e.fbt_volume);
      starts.push_back(static_cast<double>(e.fbt_start));
    } else {
      excl[static_cast<int>(e.exclusion_reason)]++;
    }
  }
  auto mean_of = [](std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto median_of = [](std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::ostringstream os;
  os << "cohort report\n";
  os << "patients=" << eps.size() << "\n";
  os << "included=" << included << "\n";
  os << "label_success=" << success << "\n";
  os << "label_failure=" << failure << "\n";
  for (ExclusionReason r : {ExclusionReason::under_18, ExclusionReason::stay_lt_12h,
                            ExclusionReason::no_fbt_in_24h, ExclusionReason::not_hypotensive,
                            ExclusionReason::insufficient_map_data})
    os << "excluded_" << exclusion_reason_name(r) << "=" << excl[static_cast<int>(r)] << "\n";
  os << "fbt_rate_mean=" << fmt_g(mean_of(rates), 8) << " median=" << fmt_g(median_of(rates), 8)
     << "\n";
  os << "fbt_volume_mean=" << fmt_g(mean_of(volumes), 8)
     << " median=" << fmt_g(median_of(volumes), 8) << "\n";
  os << "fbt_start_mean_min=" << fmt_g(mean_of(starts), 8)
     << " median=" << fmt_g(median_of(starts), 8) << "\n";
  return os.str();
}

inline constexpr const char* kEpisodesHeader =
    "patient_id\tincluded\texclusion_reason\tfbt_start\tfbt_rate\tfbt_volume\tmap_at_start\tlabel";

inline std::string serialize_episodes(const std::vector<FbtEpisode>& eps) {
  std::string s = std::string(kEpisodesHeader) + "\n";
  for (const auto& e : eps) {
    s += e.patient_id;
    s += e.included ? "\t1\t" : "\t0\t";
    s += exclusion_reason_name(e.exclusion_reason);
    if (e.included || e.exclusion_reason == ExclusionReason::not_hypotensive ||
        e.exclusion_reason == ExclusionReason::insufficient_map_data) {
      s += "\t" + std::to_string(e.fbt_start) + "\t" + fmt_g17(e.fbt_rate) + "\t" +
           fmt_g17(e.fbt_volume);
    } else {
      s += "\t\t\t";
    }
    s += e.included || e.exclusion_reason == ExclusionReason::not_hypotensive
             ? "\t" + fmt_g17(e.map_at_start)
             : "\t";
    s += e.included ? "\t" + std::to_string(e.label) : "\t";
    s += "\n";
  }
  return s;
}

inline std::vector<FbtEpisode> parse_episodes(const std::string& content,
                                              const std::string& path_for_errors = "episodes") {
  std::vector<FbtEpisode> out;
  auto lines = read_lines_from_string(content);
  if (lines.empty() || lines[0] != kEpisodesHeader)
    throw FbtError(path_for_errors + ": bad episodes header");
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != 8) detail::row_error(path_for_errors, i + 1, "expected 8 columns");
    FbtEpisode e;
    e.patient_id = c[0];
    e.included = c[1] == "1";
    if (!parse_exclusion_reason(c[2], e.exclusion_reason))
      detail::row_error(path_for_errors, i + 1, "bad exclusion_reason");
    if (!c[3].empty() && !parse_int64(c[3], e.fbt_start))
      detail::row_error(path_for_errors, i + 1, "bad fbt_start");
    if (!c[4].empty()) parse_double(c[4], e.fbt_rate);
    if (!c[5].empty()) parse_double(c[5], e.fbt_volume);
    if (!c[6].empty()) parse_double(c[6], e.map_at_start);
    if (!c[7].empty()) {
      int64_t l;
      if (!parse_int64(c[7], l)) detail::row_error(path_for_errors, i + 1, "bad label");
      e.label = static_cast<int>(l);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace fbt
