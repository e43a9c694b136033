#pragma once

// Feature construction for both experiment settings.
//
// Time-aggregated: static block + the in-window aggregate of every
// time-varying kind except MAP at three anchors (fbt-360, fbt-120, fbt),
// window [anchor-30, anchor+30] closed. Empty windows are missing, except for
// vasopressor rates where absence means a dosage of zero.
//
// Time-series: [fbt-360, fbt) divided into T equal bins (T in {12,36,72}).
// Cell = in-bin aggregate; empty bins are forward-filled from the latest
// earlier bin; leading empties stay missing. Static columns repeat per row.
//
// Normalization: per-column min/max plus median over observed training cells
// only. Missing -> median, then (v - min) / (max - min) clamped to [0,1];
// constant columns normalize to 0.

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fbt/cohort.hpp"
#include "fbt/common.hpp"
#include "fbt/tensor.hpp"
#include "fbt/types.hpp"

namespace fbt {

enum class AggStat { mean, last };

inline const char* agg_stat_name(AggStat s) { return s == AggStat::mean ? "mean" : "last"; }

constexpr int64_t kAnchorHalfWindowMin = 30;
constexpr int64_t kSeriesWindowMin = 360;

struct AggregatedFeatures {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Tensor values;              // N x D
  std::vector<uint8_t> mask;  // 1 = observed
  size_t dim() const { return values.cols(); }
};

struct SeriesFeatures {
  std::vector<std::string> ids;
  std::vector<int> labels;
  size_t timesteps = 0;
  Tensor values;              // shape {N, T, F}
  std::vector<uint8_t> mask;  // N*T*F
  size_t feature_dim() const { return values.shape[2]; }
  double* row(size_t episode, size_t t) {
    return values.data.data() + (episode * timesteps + t) * feature_dim();
  }
  const double* row(size_t episode, size_t t) const {
    return values.data.data() + (episode * timesteps + t) * feature_dim();
  }
};

namespace detail {

// Static block in schema column order; returns parallel (value, observed).
inline void fill_static(const PatientRecord& p, double* out, uint8_t* mask) {
  const auto& schema = FeatureSchema::instance();
  size_t i = 0;
  auto put = [&](double v, bool obs) {
    out[i] = obs ? v : 0.0;
    mask[i] = obs ? 1 : 0;
    ++i;
  };
  put(p.age, true);
  put(p.gender == Gender::male ? 1.0 : 0.0, true);
  put(p.gender == Gender::female ? 1.0 : 0.0, true);
  for (size_t e = 0; e < ethnicity_codes().size(); ++e)
    put(p.ethnicity == static_cast<int>(e) ? 1.0 : 0.0, true);
  put(p.weight.value_or(0.0), p.weight.has_value());
  put(p.height.value_or(0.0), p.height.has_value());
  put(static_cast<double>(p.sofa_at_admission), true);
  for (uint8_t f : p.comorbidity_flags) put(f ? 1.0 : 0.0, true);
  if (i != schema.static_dim()) throw FbtError("static block size mismatch");
}

struct WindowAgg {
  double sum = 0.0;
  size_t count = 0;
  double last = 0.0;
  double aggregate(AggStat s) const {
    return s == AggStat::mean ? sum / static_cast<double>(count) : last;
  }
};

}  // namespace detail

inline void aggregate_features(const PatientRecord& p, const EventStream& stream,
                               const FbtEpisode& ep, AggStat stat, double* out, uint8_t* mask) {
  const auto& schema = FeatureSchema::instance();
  detail::fill_static(p, out, mask);
  size_t col = schema.static_dim();
  for (size_t a = 0; a < anchor_offsets().size(); ++a) {
    const int64_t anchor = ep.fbt_start + anchor_offsets()[a];
    const int64_t lo = anchor - kAnchorHalfWindowMin;
    const int64_t hi = anchor + kAnchorHalfWindowMin;
    detail::WindowAgg agg[kNumTimevaryingKinds];
    for (const Event& e : stream.events) {
      if (e.time < lo) continue;
      if (e.time > hi) break;
      const int k = static_cast<int>(e.kind);
      if (k >= kNumTimevaryingKinds) continue;
      agg[k].sum += e.value;
      agg[k].count++;
      agg[k].last = e.value;
    }
    for (EventKind k : schema.timevarying_kinds()) {
      if (k == EventKind::mean_arterial_pressure) continue;
      const auto& w = agg[static_cast<int>(k)];
      const bool zero_when_absent = kind_table()[static_cast<int>(k)].absent_means_zero;
      if (w.count > 0) {
        out[col] = w.aggregate(stat);
        mask[col] = 1;
      } else if (zero_when_absent) {
        out[col] = 0.0;
        mask[col] = 1;
      } else {
        out[col] = 0.0;
        mask[col] = 0;
      }
      ++col;
    }
  }
  if (col != schema.aggregated_dim()) throw FbtError("aggregated dim mismatch");
}

inline AggregatedFeatures build_aggregated(const Dataset& ds, const std::vector<FbtEpisode>& eps,
                                           AggStat stat = AggStat::mean) {
  const auto& schema = FeatureSchema::instance();
  const size_t d = schema.aggregated_dim();
  AggregatedFeatures f;
  for (const auto& e : eps) {
    if (!e.included) continue;
    f.ids.push_back(e.patient_id);
    f.labels.push_back(e.label);
  }
  f.values = Tensor(f.ids.size(), d);
  f.mask.assign(f.ids.size() * d, 0);
  size_t row = 0;
  for (const auto& e : eps) {
    if (!e.included) continue;
    const auto& p = ds.patients.at(e.patient_id);
    const auto& s = ds.streams.at(e.patient_id);
    aggregate_features(p, s, e, stat, f.values.row(row), f.mask.data() + row * d);
    ++row;
  }
  return f;
}

// Resamples [fbt-360, fbt) into T equal bins for one episode.
inline void resample_series(const PatientRecord& p, const EventStream& stream,
                            const FbtEpisode& ep, size_t timesteps, AggStat stat, double* out,
                            uint8_t* mask) {
  if (timesteps == 0 || kSeriesWindowMin % timesteps != 0)
    throw FbtError("invalid timestep count: " + std::to_string(timesteps));
  const auto& schema = FeatureSchema::instance();
  const size_t f_dim = schema.series_dim();
  const size_t s_dim = schema.static_dim();
  const int64_t width = kSeriesWindowMin / static_cast<int64_t>(timesteps);
  const int64_t window_lo = ep.fbt_start - kSeriesWindowMin;

  std::vector<double> static_vals(s_dim);
  std::vector<uint8_t> static_mask(s_dim);
  detail::fill_static(p, static_vals.data(), static_mask.data());

  std::vector<detail::WindowAgg> agg(timesteps * kNumTimevaryingKinds);
  for (const Event& e : stream.events) {
    if (e.time < window_lo) continue;
    if (e.time >= ep.fbt_start) break;
    const int k = static_cast<int>(e.kind);
    if (k >= kNumTimevaryingKinds) continue;
    const size_t bin = static_cast<size_t>((e.time - window_lo) / width);
    auto& w = agg[bin * kNumTimevaryingKinds + k];
    w.sum += e.value;
    w.count++;
    w.last = e.value;
  }

  for (size_t t = 0; t < timesteps; ++t) {
    double* row = out + t * f_dim;
    uint8_t* rmask = mask + t * f_dim;
    std::memcpy(row, static_vals.data(), s_dim * sizeof(double));
    std::memcpy(rmask, static_mask.data(), s_dim);
    for (int k = 0; k < kNumTimevaryingKinds; ++k) {
      const auto& w = agg[t * kNumTimevaryingKinds + k];
      if (w.count > 0) {
        row[s_dim + k] = w.aggregate(stat);
        rmask[s_dim + k] = 1;
      } else if (t > 0 && mask[(t - 1) * f_dim + s_dim + k]) {
        // forward fill from the latest earlier bin
        row[s_dim + k] = out[(t - 1) * f_dim + s_dim + k];
        rmask[s_dim + k] = 1;
      } else {
        row[s_dim + k] = 0.0;
        rmask[s_dim + k] = 0;
      }
    }
  }
  // vasopressors: absence means the drug was not administered
  for (int k = 0; k < kNumTimevaryingKinds; ++k) {
    if (!kind_table()[k].absent_means_zero) continue;
    for (size_t t = 0; t < timesteps; ++t) {
      if (!mask[t * f_dim + s_dim + k]) {
        out[t * f_dim + s_dim + k] = 0.0;
        mask[t * f_dim + s_dim + k] = 1;
      }
    }
  }
}

inline SeriesFeatures build_series(const Dataset& ds, const std::vector<FbtEpisode>& eps,
                                   size_t timesteps, AggStat stat = AggStat::mean) {
  const auto& schema = FeatureSchema::instance();
  const size_t f_dim = schema.series_dim();
  SeriesFeatures f;
  f.timesteps = timesteps;
  for (const auto& e : eps) {
    if (!e.included) continue;
    f.ids.push_back(e.patient_id);
    f.labels.push_back(e.label);
  }
  f.values = Tensor({f.ids.size(), timesteps, f_dim});
  f.mask.assign(f.ids.size() * timesteps * f_dim, 0);
  size_t row = 0;
  for (const auto& e : eps) {
    if (!e.included) continue;
    resample_series(ds.patients.at(e.patient_id), ds.streams.at(e.patient_id), e, timesteps, stat,
                    f.values.data.data() + row * timesteps * f_dim,
                    f.mask.data() + row * timesteps * f_dim);
    ++row;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormalizationStats {
  std::vector<std::string> columns;
  std::vector<double> min, max, median;
  std::vector<std::string> warnings;
};

// Fit over the observed cells of the given sample rows (training split only).
// `row_cells` = cells per sample (D for aggregated, T*F for series, reduced
// per-column over the trailing dimension).
inline NormalizationStats fit_normalization(const std::vector<std::string>& columns,
                                            const double* values, const uint8_t* mask,
                                            const std::vector<size_t>& sample_rows,
                                            size_t rows_per_sample, size_t cols) {
  NormalizationStats st;
  st.columns = columns;
  st.min.assign(cols, 0.0);
  st.max.assign(cols, 0.0);
  st.median.assign(cols, 0.0);
  std::vector<std::vector<double>> observed(cols);
  for (size_t s : sample_rows) {
    for (size_t r = 0; r < rows_per_sample; ++r) {
      const size_t base = (s * rows_per_sample + r) * cols;
      for (size_t c = 0; c < cols; ++c)
        if (mask[base + c]) observed[c].push_back(values[base + c]);
    }
  }
  for (size_t c = 0; c < cols; ++c) {
    auto& v = observed[c];
    if (v.empty()) {
      st.warnings.push_back("column " + columns[c] +
                            " observed nowhere in training split; stats fall back to 0");
      continue;
    }
    std::sort(v.begin(), v.end());
    st.min[c] = v.front();
    st.max[c] = v.back();
    st.median[c] =
        v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  }
  return st;
}

inline NormalizationStats fit_normalization(const AggregatedFeatures& f,
                                            const std::vector<size_t>& train_rows) {
  return fit_normalization(FeatureSchema::instance().aggregated_columns(), f.values.data.data(),
                           f.mask.data(), train_rows, 1, f.dim());
}

inline NormalizationStats fit_normalization(const SeriesFeatures& f,
                                            const std::vector<size_t>& train_rows) {
  return fit_normalization(FeatureSchema::instance().series_columns(), f.values.data.data(),
                           f.mask.data(), train_rows, f.timesteps, f.feature_dim());
}

// Impute missing cells with the training median, then min-max scale into
// [0,1]; out-of-range values (unseen in training) are clamped.
inline void apply_normalization(double* values, uint8_t* mask, size_t n_rows, size_t cols,
                                const NormalizationStats& st) {
  if (st.min.size() != cols) throw FbtError("normalization stats dimension mismatch");
  for (size_t r = 0; r < n_rows; ++r) {
    double* row = values + r * cols;
    uint8_t* rm = mask + r * cols;
    for (size_t c = 0; c < cols; ++c) {
      double v = rm[c] ? row[c] : st.median[c];
      const double span = st.max[c] - st.min[c];
      v = span > 0.0 ? (v - st.min[c]) / span : 0.0;
      row[c] = std::clamp(v, 0.0, 1.0);
      rm[c] = 1;
    }
  }
}

inline void apply_normalization(AggregatedFeatures& f, const NormalizationStats& st) {
  apply_normalization(f.values.data.data(), f.mask.data(), f.ids.size(), f.dim(), st);
}

inline void apply_normalization(SeriesFeatures& f, const NormalizationStats& st) {
  apply_normalization(f.values.data.data(), f.mask.data(), f.ids.size() * f.timesteps,
                      f.feature_dim(), st);
}

// ---------------------------------------------------------------------------
// Split: seeded shuffle, stratified by label; 75/25 outer train/test, then
// 75/25 of train into train/val.
// ---------------------------------------------------------------------------

enum class Partition { train = 0, val = 1, test = 2 };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    default: return "test";
  }
}

struct SplitAssignment {
  std::vector<Partition> tags;  // aligned with the feature row order
  uint64_t seed = 0;

  std::vector<size_t> rows(Partition p) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < tags.size(); ++i)
      if (tags[i] == p) out.push_back(i);
    return out;
  }
};

inline SplitAssignment split_episodes(const std::vector<int>& labels, uint64_t seed) {
  if (labels.size() < 4) throw FbtError("need at least 4 episodes to split");
  SplitAssignment sa;
  sa.seed = seed;
  sa.tags.assign(labels.size(), Partition::train);
  Rng rng(derive_seed(seed, 0x5e17));
  for (int cls : {0, 1}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    const size_t n_test = static_cast<size_t>(std::llround(0.25 * static_cast<double>(idx.size())));
    for (size_t i = 0; i < n_test; ++i) sa.tags[idx[i]] = Partition::test;
    const size_t n_rest = idx.size() - n_test;
    const size_t n_val = static_cast<size_t>(std::llround(0.25 * static_cast<double>(n_rest)));
    for (size_t i = n_test; i < n_test + n_val; ++i) sa.tags[idx[i]] = Partition::val;
  }
  return sa;
}

// ---------------------------------------------------------------------------
// Serialization. Values use %.17g so a written matrix reloads bit-exactly.
// ---------------------------------------------------------------------------

inline std::string serialize_aggregated(const AggregatedFeatures& f) {
  const auto& cols = FeatureSchema::instance().aggregated_columns();
  std::string s = "patient_id\tlabel";
  for (const auto& c : cols) s += "\t" + c;
  s += "\n";
  for (size_t i = 0; i < f.ids.size(); ++i) {
    s += f.ids[i] + "\t" + std::to_string(f.labels[i]);
    for (size_t c = 0; c < f.dim(); ++c) {
      s += "\t";
      if (f.mask[i * f.dim() + c]) s += fmt_g17(f.values.at(i, c));
    }
    s += "\n";
  }
  return s;
}

inline AggregatedFeatures parse_aggregated(const std::string& content,
                                           const std::string& path = "features") {
  const auto& cols = FeatureSchema::instance().aggregated_columns();
  auto lines = read_lines_from_string(content);
  if (lines.empty()) throw FbtError(path + ": empty feature file");
  {
    std::string expect = "patient_id\tlabel";
    for (const auto& c : cols) expect += "\t" + c;
    if (lines[0] != expect) throw FbtError(path + ": header does not match feature schema");
  }
  AggregatedFeatures f;
  const size_t d = cols.size();
  std::vector<double> vals;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != d + 2) detail::row_error(path, i + 1, "column count mismatch");
    f.ids.push_back(c[0]);
    int64_t lab;
    if (!parse_int64(c[1], lab)) detail::row_error(path, i + 1, "bad label");
    f.labels.push_back(static_cast<int>(lab));
    for (size_t j = 0; j < d; ++j) {
      if (c[2 + j].empty()) {
        vals.push_back(0.0);
        f.mask.push_back(0);
      } else {
        double v;
        if (!parse_double(c[2 + j], v)) detail::row_error(path, i + 1, "bad value");
        vals.push_back(v);
        f.mask.push_back(1);
      }
    }
  }
  f.values = Tensor(f.ids.size(), d);
  f.values.data = std::move(vals);
  return f;
}

inline std::string serialize_series(const SeriesFeatures& f) {
  const auto& cols = FeatureSchema::instance().series_columns();
  std::string s = "patient_id\tlabel\tt";
  for (const auto& c : cols) s += "\t" + c;
  s += "\n# timesteps=" + std::to_string(f.timesteps) + "\n";
  const size_t d = f.feature_dim();
  for (size_t i = 0; i < f.ids.size(); ++i) {
    for (size_t t = 0; t < f.timesteps; ++t) {
      s += f.ids[i] + "\t" + std::to_string(f.labels[i]) + "\t" + std::to_string(t);
      const double* row = f.row(i, t);
      const uint8_t* m = f.mask.data() + (i * f.timesteps + t) * d;
      for (size_t c = 0; c < d; ++c) {
        s += "\t";
        if (m[c]) s += fmt_g17(row[c]);
      }
      s += "\n";
    }
  }
  return s;
}

inline SeriesFeatures parse_series(const std::string& content, const std::string& path = "series") {
  const auto& cols = FeatureSchema::instance().series_columns();
  auto lines = read_lines_from_string(content);
  if (lines.size() < 2) throw FbtError(path + ": empty series file");
  {
    std::string expect = "patient_id\tlabel\tt";
    for (const auto& c : cols) expect += "\t" + c;
    if (lines[0] != expect) throw FbtError(path + ": header does not match feature schema");
  }
  if (lines[1].rfind("# timesteps=", 0) != 0) throw FbtError(path + ": missing timesteps line");
  SeriesFeatures f;
  int64_t ts;
  if (!parse_int64(lines[1].substr(12), ts) || ts <= 0)
    throw FbtError(path + ": bad timesteps value");
  f.timesteps = static_cast<size_t>(ts);
  const size_t d = cols.size();
  std::vector<double> vals;
  std::string cur_id;
  for (size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != d + 3) detail::row_error(path, i + 1, "column count mismatch");
    if (c[0] != cur_id) {
      cur_id = c[0];
      f.ids.push_back(c[0]);
      int64_t lab;
      if (!parse_int64(c[1], lab)) detail::row_error(path, i + 1, "bad label");
      f.labels.push_back(static_cast<int>(lab));
    }
    for (size_t j = 0; j < d; ++j) {
      if (c[3 + j].empty()) {
        vals.push_back(0.0);
        f.mask.push_back(0);
      } else {
        double v;
        if (!parse_double(c[3 + j], v)) detail::row_error(path, i + 1, "bad value");
        vals.push_back(v);
        f.mask.push_back(1);
      }
    }
  }
  if (vals.size() != f.ids.size() * f.timesteps * d)
    throw FbtError(path + ": row count is not ids * timesteps");
  f.values = Tensor({f.ids.size(), f.timesteps, d});
  f.values.data = std::move(vals);
  return f;
}

inline std::string serialize_split(const std::vector<std::string>& ids, const SplitAssignment& sa) {
  std::string s = "# seed=" + std::to_string(sa.seed) + "\npatient_id\tpartition\n";
  for (size_t i = 0; i < ids.size(); ++i)
    s += ids[i] + "\t" + partition_name(sa.tags[i]) + "\n";
  return s;
}

inline SplitAssignment parse_split(const std::string& content, const std::vector<std::string>& ids,
                                   const std::string& path = "split") {
  auto lines = read_lines_from_string(content);
  if (lines.size() < 2 || lines[0].rfind("# seed=", 0) != 0 || lines[1] != "patient_id\tpartition")
    throw FbtError(path + ": bad split header");
  SplitAssignment sa;
  int64_t seed;
  if (!parse_int64(lines[0].substr(7), seed)) throw FbtError(path + ": bad seed");
  sa.seed = static_cast<uint64_t>(seed);
  sa.tags.assign(ids.size(), Partition::train);
  size_t row = 0;
  for (size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != 2) detail::row_error(path, i + 1, "expected 2 columns");
    if (row >= ids.size() || c[0] != ids[row])
      throw FbtError(path + ": split rows do not align with feature rows");
    if (c[1] == "train")
      sa.tags[row] = Partition::train;
    else if (c[1] == "val")
      sa.tags[row] = Partition::val;
    else if (c[1] == "test")
      sa.tags[row] = Partition::test;
    else
      detail::row_error(path, i + 1, "bad partition tag");
    ++row;
  }
  if (row != ids.size()) throw FbtError(path + ": split row count mismatch");
  return sa;
}

inline std::string serialize_norm_stats(const NormalizationStats& st) {
  std::string s = "column\tmin\tmax\tmedian\n";
  for (size_t c = 0; c < st.columns.size(); ++c)
    s += st.columns[c] + "\t" + fmt_g17(st.min[c]) + "\t" + fmt_g17(st.max[c]) + "\t" +
         fmt_g17(st.median[c]) + "\n";
  return s;
}

inline NormalizationStats parse_norm_stats(const std::string& content,
                                           const std::string& path = "norm_stats") {
  auto lines = read_lines_from_string(content);
  if (lines.empty() || lines[0] != "column\tmin\tmax\tmedian")
    throw FbtError(path + ": bad norm stats header");
  NormalizationStats st;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto c = split(lines[i], '\t');
    if (c.size() != 4) detail::row_error(path, i + 1, "expected 4 columns");
    st.columns.push_back(c[0]);
    double mn, mx, md;
    if (!parse_double(c[1], mn) || !parse_double(c[2], mx) || !parse_double(c[3], md))
      detail::row_error(path, i + 1, "bad stats value");
    st.min.push_back(mn);
    st.max.push_back(mx);
    st.median.push_back(md);
  }
  return st;
}

}  // namespace fbt
