#pragma once

// Training loops with early stopping on the validation split, evaluation,
// attention extraction, and the experiment grid. Everything is deterministic
// given (config, seed, dataset): batch order, dropout masks, and optimizer
// state all derive from the seed.

#include <chrono>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fbt/artifact.hpp"
#include "fbt/experiment.hpp"
#include "fbt/featurize.hpp"
#include "fbt/linear.hpp"
#include "fbt/metrics.hpp"
#include "fbt/nn/model.hpp"
#include "fbt/nn/optimizer.hpp"

namespace fbt {

// ---------------------------------------------------------------------------
// Row gathering
// ---------------------------------------------------------------------------

inline Tensor gather_rows(const Tensor& x, const std::vector<size_t>& idx) {
  Tensor out(idx.size(), x.cols());
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(x.row(idx[i]), x.row(idx[i]) + x.cols(), out.row(i));
  return out;
}

inline std::vector<int> gather_labels(const std::vector<int>& labels,
                                      const std::vector<size_t>& idx) {
  std::vector<int> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

// Batch of series rows as T tensors of shape B x F.
inline std::vector<Tensor> gather_series_batch(const SeriesFeatures& f,
                                               const std::vector<size_t>& idx) {
  const size_t d = f.feature_dim();
  std::vector<Tensor> seq(f.timesteps, Tensor(idx.size(), d));
  for (size_t t = 0; t < f.timesteps; ++t)
    for (size_t i = 0; i < idx.size(); ++i)
      std::copy(f.row(idx[i], t), f.row(idx[i], t) + d, seq[t].row(i));
  return seq;
}

inline AggregatedFeatures subset(const AggregatedFeatures& f, const std::vector<size_t>& rows) {
  AggregatedFeatures out;
  const size_t d = f.dim();
  out.values = Tensor(rows.size(), d);
  out.mask.resize(rows.size() * d);
  for (size_t i = 0; i < rows.size(); ++i) {
    out.ids.push_back(f.ids[rows[i]]);
    out.labels.push_back(f.labels[rows[i]]);
    std::copy(f.values.row(rows[i]), f.values.row(rows[i]) + d, out.values.row(i));
    std::copy(f.mask.begin() + rows[i] * d, f.mask.begin() + (rows[i] + 1) * d,
              out.mask.begin() + i * d);
  }
  return out;
}

inline SeriesFeatures subset(const SeriesFeatures& f, const std::vector<size_t>& rows) {
  SeriesFeatures out;
  out.timesteps = f.timesteps;
  const size_t cells = f.timesteps * f.feature_dim();
  out.values = Tensor({rows.size(), f.timesteps, f.feature_dim()});
  out.mask.resize(rows.size() * cells);
  for (size_t i = 0; i < rows.size(); ++i) {
    out.ids.push_back(f.ids[rows[i]]);
    out.labels.push_back(f.labels[rows[i]]);
    std::copy(f.values.data.begin() + rows[i] * cells,
              f.values.data.begin() + (rows[i] + 1) * cells, out.values.data.begin() + i * cells);
    std::copy(f.mask.begin() + rows[i] * cells, f.mask.begin() + (rows[i] + 1) * cells,
              out.mask.begin() + i * cells);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct EvalReport {
  ExperimentConfig config;
  uint64_t dataset_hash = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  ConfusionCounts confusion;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> probs;
  double runtime_seconds = 0.0;  // wall clock; written to logs only so the
                                 // report file stays byte-reproducible

  std::string to_file_text() const {
    std::string s = "fbt-eval v1\n";
    for (const auto& [k, v] : config.echo_pairs()) s += "cfg " + k + "=" + v + "\n";
    s += "dataset_hash=" + hex64(dataset_hash) + "\n";
    s += "test_size=" + std::to_string(ids.size()) + "\n";
    s += "accuracy=" + fmt_f(accuracy, 6) + "\n";
    s += "auc=" + fmt_f(auc, 6) + "\n";
    s += "confusion tp=" + std::to_string(confusion.tp) + " tn=" + std::to_string(confusion.tn) +
         " fp=" + std::to_string(confusion.fp) + " fn=" + std::to_string(confusion.fn) + "\n";
    s += "[per_episode]\npatient_id\tlabel\tprob\n";
    for (size_t i = 0; i < ids.size(); ++i)
      s += ids[i] + "\t" + std::to_string(labels[i]) + "\t" + fmt_g(probs[i], 10) + "\n";
    s += "end\n";
    return s;
  }
};

// ---------------------------------------------------------------------------
// Net training
// ---------------------------------------------------------------------------

struct TrainOutcome {
  ModelArtifact artifact;
  std::string log;
  size_t epochs_run = 0;
  size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

namespace train_detail {

inline std::vector<ParamRef> group_params(const std::vector<ParamRef>& all, ParamGroup g) {
  std::vector<ParamRef> out;
  for (const auto& p : all)
    if (p.group == g) out.push_back(p);
  return out;
}

inline std::vector<Tensor> snapshot(const std::vector<ParamRef>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.value);
  return out;
}

inline void restore(const std::vector<ParamRef>& params, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < params.size(); ++i) *params[i].value = snap[i];
}

// Chunked loss in eval mode (no dropout, no gradient use).
inline LossInfo eval_loss_aggregated(NetModel& model, const Tensor& x,
                                     const std::vector<int>& labels, size_t chunk) {
  LossInfo total;
  size_t done = 0;
  Rng dummy(0);
  while (done < x.rows()) {
    const size_t b = std::min(chunk, x.rows() - done);
    std::vector<size_t> idx(b);
    for (size_t i = 0; i < b; ++i) idx[i] = done + i;
    Tensor xb = gather_rows(x, idx);
    std::vector<int> yb(labels.begin() + done, labels.begin() + done + b);
    model.zero_grads();
    LossInfo li = model.loss_and_grads(xb, yb, false, dummy);
    const double w = static_cast<double>(b);
    total.total += li.total * w;
    total.bce += li.bce * w;
    total.recon += li.recon * w;
    done += b;
  }
  const double n = static_cast<double>(x.rows());
  total.total /= n;
  total.bce /= n;
  total.recon /= n;
  return total;
}

inline LossInfo eval_loss_series(NetModel& model, const SeriesFeatures& f,
                                 const std::vector<size_t>& rows, size_t chunk) {
  LossInfo total;
  size_t done = 0;
  Rng dummy(0);
  while (done < rows.size()) {
    const size_t b = std::min(chunk, rows.size() - done);
    std::vector<size_t> idx(rows.begin() + done, rows.begin() + done + b);
    auto seq = gather_series_batch(f, idx);
    std::vector<int> yb = gather_labels(f.labels, idx);
    model.zero_grads();
    LossInfo li = model.loss_and_grads_series(seq, yb, false, dummy);
    const double w = static_cast<double>(b);
    total.total += li.total * w;
    total.bce += li.bce * w;
    total.recon += li.recon * w;
    done += b;
  }
  const double n = static_cast<double>(rows.size());
  total.total /= n;
  total.bce /= n;
  total.recon /= n;
  return total;
}

}  // namespace train_detail

// Trains an MLP or RNN classifier (optionally with a joint autoencoder).
// Aggregated features pass f_agg; series features pass f_series. Features
// must already be normalized. Returns the best-validation-loss parameters.
inline TrainOutcome train_net(const ExperimentConfig& cfg, const AggregatedFeatures* f_agg,
                              const SeriesFeatures* f_series, const SplitAssignment& split,
                              uint64_t dataset_hash) {
  const bool series = cfg.setting == Setting::time_series;
  const size_t input_dim = series ? f_series->feature_dim() : f_agg->dim();
  const auto& labels = series ? f_series->labels : f_agg->labels;

  TrainOutcome out;
  out.artifact.config = cfg;
  out.artifact.input_dim = input_dim;
  out.artifact.dataset_hash = dataset_hash;
  out.artifact.net = std::make_shared<NetModel>(cfg, input_dim);
  NetModel& model = *out.artifact.net;

  auto params = model.params();
  auto cls_params = train_detail::group_params(params, ParamGroup::classifier);
  auto ae_params = train_detail::group_params(params, ParamGroup::autoencoder);
  RmsProp rmsprop(cfg.lr, cfg.rmsprop_rho, cfg.opt_eps);
  Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.opt_eps);

  std::vector<size_t> train_rows = split.rows(Partition::train);
  std::vector<size_t> val_rows = split.rows(Partition::val);
  if (train_rows.empty() || val_rows.empty())
    throw FbtError("training requires non-empty train and val partitions");

  Rng rng(derive_seed(cfg.seed, 0x7241));
  std::ostringstream log;
  double best_val = 0.0;
  bool have_best = false;
  std::vector<Tensor> best_params;
  size_t since_best = 0;

  Tensor x_train_all;
  if (!series) x_train_all = f_agg->values;  // already normalized

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(train_rows);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
      const size_t b = std::min(cfg.batch_size, train_rows.size() - start);
      std::vector<size_t> idx(train_rows.begin() + start, train_rows.begin() + start + b);
      std::vector<int> yb = gather_labels(labels, idx);
      model.zero_grads();
      LossInfo li;
      try {
        if (series) {
          auto seq = gather_series_batch(*f_series, idx);
          li = model.loss_and_grads_series(seq, yb, true, rng);
        } else {
          Tensor xb = gather_rows(x_train_all, idx);
          li = model.loss_and_grads(xb, yb, true, rng);
        }
      } catch (const FbtError& e) {
        throw FbtError("epoch " + std::to_string(epoch) + " batch " +
                       std::to_string(start / cfg.batch_size) + ": " + e.what());
      }
      if (!cls_params.empty()) rmsprop.step(cls_params);
      if (!ae_params.empty()) adam.step(ae_params);
      epoch_loss += li.total * static_cast<double>(b);
      seen += b;
    }
    epoch_loss /= static_cast<double>(seen);

    LossInfo val = series
                       ? train_detail::eval_loss_series(model, *f_series, val_rows, cfg.batch_size)
                       : train_detail::eval_loss_aggregated(
                             model, gather_rows(x_train_all, val_rows),
                             gather_labels(labels, val_rows), cfg.batch_size);
    out.epochs_run = epoch;
    const bool improved = !have_best || val.total < best_val;
    if (improved) {
      best_val = val.total;
      have_best = true;
      best_params = train_detail::snapshot(params);
      out.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    log << "epoch=" << epoch << " train_loss=" << fmt_g(epoch_loss, 10)
        << " val_loss=" << fmt_g(val.total, 10) << " val_bce=" << fmt_g(val.bce, 10)
        << " val_recon=" << fmt_g(val.recon, 10) << (improved ? " best=1" : " best=0") << "\n";
    if (since_best > cfg.patience) break;
  }
  if (!have_best) throw FbtError("training ran no epochs (epochs=0)");
  train_detail::restore(params, best_params);
  out.best_val_loss = best_val;
  out.log = log.str();
  return out;
}

// ---------------------------------------------------------------------------
// Linear training (with optional pretrained autoencoder representation)
// ---------------------------------------------------------------------------

inline const std::vector<double>& lambda_grid() {
  static const std::vector<double> g = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  return g;
}

// Unsupervised reconstruction pretraining (Adam), fixed epoch budget.
inline std::string pretrain_autoencoder(Autoencoder& ae, const Tensor& x_train,
                                        const Tensor& x_val, const ExperimentConfig& cfg) {
  auto params = autoencoder_params(ae);
  Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.opt_eps);
  Rng rng(derive_seed(cfg.seed, 0xAE01));
  std::vector<size_t> rows(x_train.rows());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::ostringstream log;
  Tensor dcode_zero, drecon;
  for (size_t epoch = 1; epoch <= cfg.ae_pretrain_epochs; ++epoch) {
    rng.shuffle(rows);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < rows.size(); start += cfg.batch_size) {
      const size_t b = std::min(cfg.batch_size, rows.size() - start);
      std::vector<size_t> idx(rows.begin() + start, rows.begin() + start + b);
      Tensor xb = gather_rows(x_train, idx);
      for (auto& p : params) p.grad->zero();
      ae.forward(xb);
      const double mse = mse_loss(ae.recon, xb, drecon, 1.0);
      dcode_zero = Tensor(ae.code.shape);
      ae.backward(dcode_zero, drecon);
      adam.step(params);
      epoch_loss += mse * static_cast<double>(b);
    }
    epoch_loss /= static_cast<double>(rows.size());
    ae.forward(x_val);
    Tensor tmp;
    const double val_mse = mse_loss(ae.recon, x_val, tmp, 0.0);
    log << "ae_epoch=" << epoch << " train_mse=" << fmt_g(epoch_loss, 10)
        << " val_mse=" << fmt_g(val_mse, 10) << "\n";
  }
  return log.str();
}

// Lasso/ridge on normalized aggregated features. linear_lambda < 0 selects
// the strength on the validation split by AUC (ties go to the larger,
// more regularized lambda).
inline TrainOutcome train_linear(const ExperimentConfig& cfg, const AggregatedFeatures& f,
                                 const SplitAssignment& split, uint64_t dataset_hash) {
  TrainOutcome out;
  out.artifact.config = cfg;
  out.artifact.input_dim = f.dim();
  out.artifact.dataset_hash = dataset_hash;

  std::vector<size_t> train_rows = split.rows(Partition::train);
  std::vector<size_t> val_rows = split.rows(Partition::val);
  Tensor x_train = gather_rows(f.values, train_rows);
  Tensor x_val = gather_rows(f.values, val_rows);
  std::vector<int> y_train = gather_labels(f.labels, train_rows);
  std::vector<int> y_val = gather_labels(f.labels, val_rows);

  std::ostringstream log;
  if (cfg.representation == Representation::distributed) {
    auto ae = std::make_shared<Autoencoder>();
    Rng init_rng(derive_seed(cfg.seed, 0x1217));
    ae->init(f.dim(), {cfg.ae_hidden_aggregated}, cfg.ae_bottleneck_aggregated, init_rng);
    log << pretrain_autoencoder(*ae, x_train, x_val, cfg);
    Tensor code_train, code_val;
    ae->encode_inference(x_train, code_train);
    ae->encode_inference(x_val, code_val);
    x_train = std::move(code_train);
    x_val = std::move(code_val);
    out.artifact.ae = ae;
  }

  const Penalty penalty = cfg.algorithm == Algorithm::lasso ? Penalty::l1 : Penalty::l2;
  LinearModel best;
  bool have_best = false;
  double best_auc = -1.0;
  if (cfg.linear_lambda >= 0.0) {
    best = fit_logistic(x_train, y_train, penalty, cfg.linear_lambda, cfg.linear_tol,
                        cfg.linear_max_iter);
    have_best = true;
    log << "lambda=" << fmt_g(cfg.linear_lambda, 6) << " fixed iterations=" << best.iterations
        << "\n";
  } else {
    for (double lam : lambda_grid()) {
      LinearModel m =
          fit_logistic(x_train, y_train, penalty, lam, cfg.linear_tol, cfg.linear_max_iter);
      const double val_auc = compute_auc(predict_proba(m, x_val), y_val);
      log << "lambda=" << fmt_g(lam, 6) << " val_auc=" << fmt_f(val_auc, 6)
          << " iterations=" << m.iterations << (m.converged ? "" : " warning=max_iter") << "\n";
      if (!have_best || val_auc > best_auc || (val_auc == best_auc && lam > best.lambda)) {
        best = std::move(m);
        best_auc = val_auc;
        have_best = true;
      }
    }
    log << "selected_lambda=" << fmt_g(best.lambda, 6) << "\n";
  }
  if (!best.converged) log << "warning: solver hit max_iter before tolerance\n";
  out.artifact.linear = std::move(best);
  out.log = log.str();
  return out;
}

// ---------------------------------------------------------------------------
// Artifact prediction and evaluation
// ---------------------------------------------------------------------------

inline std::vector<double> artifact_predict(ModelArtifact& art, const AggregatedFeatures& raw,
                                            const std::vector<size_t>& rows) {
  AggregatedFeatures sub = subset(raw, rows);
  apply_normalization(sub, art.norm);
  if (art.linear) {
    if (art.ae) {
      Tensor code;
      art.ae->encode_inference(sub.values, code);
      return predict_proba(*art.linear, code);
    }
    return predict_proba(*art.linear, sub.values);
  }
  std::vector<double> probs;
  size_t done = 0;
  const size_t chunk = art.config.batch_size;
  while (done < sub.ids.size()) {
    const size_t b = std::min(chunk, sub.ids.size() - done);
    std::vector<size_t> idx(b);
    for (size_t i = 0; i < b; ++i) idx[i] = done + i;
    Tensor xb = gather_rows(sub.values, idx);
    auto p = art.net->predict(xb);
    probs.insert(probs.end(), p.begin(), p.end());
    done += b;
  }
  return probs;
}

// attention_weights, when non-null, collects one row of T weights per row.
inline std::vector<double> artifact_predict_series(ModelArtifact& art, const SeriesFeatures& raw,
                                                   const std::vector<size_t>& rows,
                                                   std::vector<std::vector<double>>* attention_weights = nullptr) {
  SeriesFeatures sub = subset(raw, rows);
  apply_normalization(sub, art.norm);
  std::vector<double> probs;
  size_t done = 0;
  const size_t chunk = art.config.batch_size;
  while (done < sub.ids.size()) {
    const size_t b = std::min(chunk, sub.ids.size() - done);
    std::vector<size_t> idx(b);
    for (size_t i = 0; i < b; ++i) idx[i] = done + i;
    auto seq = gather_series_batch(sub, idx);
    Tensor alpha;
    auto p = art.net->predict_series(seq, attention_weights ? &alpha : nullptr);
    probs.insert(probs.end(), p.begin(), p.end());
    if (attention_weights) {
      for (size_t r = 0; r < b; ++r)
        attention_weights->emplace_back(alpha.row(r), alpha.row(r) + alpha.cols());
    }
    done += b;
  }
  return probs;
}

inline EvalReport evaluate_artifact(ModelArtifact& art, const AggregatedFeatures* f_agg,
                                    const SeriesFeatures* f_series, const SplitAssignment& split,
                                    Partition part = Partition::test) {
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  rep.config = art.config;
  rep.dataset_hash = art.dataset_hash;
  const bool series = art.config.setting == Setting::time_series;
  const auto rows = split.rows(part);
  if (rows.empty()) throw FbtError("evaluation partition is empty");
  const auto& ids = series ? f_series->ids : f_agg->ids;
  const auto& labels = series ? f_series->labels : f_agg->labels;
  for (size_t r : rows) {
    rep.ids.push_back(ids[r]);
    rep.labels.push_back(labels[r]);
  }
  rep.probs = series ? artifact_predict_series(art, *f_series, rows)
                     : artifact_predict(art, *f_agg, rows);
  rep.accuracy = compute_accuracy(rep.probs, rep.labels);
  rep.auc = compute_auc(rep.probs, rep.labels);
  rep.confusion = confusion_counts(rep.probs, rep.labels);
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Attention report (Figure-1-shaped plot data)
// ---------------------------------------------------------------------------

struct AttentionReport {
  size_t timesteps = 0;
  size_t sample_size = 0;
  uint64_t seed = 0;
  std::vector<double> mean_weight;  // length T, sums to 1 (up to fp error)

  // bin centers in minutes before FBT start
  double minutes_before_fbt(size_t t) const {
    const double width = 360.0 / static_cast<double>(timesteps);
    return 360.0 - (static_cast<double>(t) + 0.5) * width;
  }

  std::string to_file_text() const {
    std::string s = "# fbt-attention v1\n# sample_size=" + std::to_string(sample_size) +
                    " seed=" + std::to_string(seed) + "\n";
    s += "timestep\tminutes_before_fbt\tmean_weight\n";
    for (size_t t = 0; t < timesteps; ++t)
      s += std::to_string(t) + "\t" + fmt_g(minutes_before_fbt(t), 6) + "\t" +
           fmt_g(mean_weight[t], 10) + "\n";
    return s;
  }
};

constexpr size_t kAttentionSampleDefault = 300;

inline AttentionReport extract_attention_report(ModelArtifact& art, const SeriesFeatures& raw,
                                                const SplitAssignment& split,
                                                size_t sample = kAttentionSampleDefault,
                                                Partition part = Partition::test) {
  if (!art.net || !art.net->has_attention())
    throw FbtError("artifact has no attention mechanism to report");
  auto rows = split.rows(part);
  if (rows.empty()) throw FbtError("attention report needs a non-empty test partition");
  const uint64_t sub_seed = derive_seed(art.config.seed, 0xA77E);
  if (rows.size() > sample) {
    Rng rng(sub_seed);
    rng.shuffle(rows);
    rows.resize(sample);
  }
  std::vector<std::vector<double>> weights;
  artifact_predict_series(art, raw, rows, &weights);
  AttentionReport rep;
  rep.timesteps = raw.timesteps;
  rep.sample_size = rows.size();
  rep.seed = sub_seed;
  rep.mean_weight.assign(raw.timesteps, 0.0);
  for (const auto& w : weights)
    for (size_t t = 0; t < rep.timesteps; ++t) rep.mean_weight[t] += w[t];
  for (double& v : rep.mean_weight) v /= static_cast<double>(weights.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment grid (Table-1-shaped)
// ---------------------------------------------------------------------------

struct GridResult {
  ExperimentConfig config;
  bool failed = false;
  std::string error;
  double accuracy = 0.0;
  double auc = 0.0;
  bool best_accuracy = false;
  bool best_auc = false;
};

// Full grid: {lasso, ridge, mlp} x representations, plus
// {lstm, gru, lstm_attn, gru_attn} x {12, 36, 72} x representations.
inline std::vector<ExperimentConfig> grid_configs(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  size_t cell = 0;
  auto push = [&](Setting s, Algorithm a, size_t t, Representation r) {
    ExperimentConfig c = base;
    c.setting = s;
    c.algorithm = a;
    c.timesteps = t;
    c.representation = r;
    c.seed = derive_seed(base.seed, 0x60d + cell);
    ++cell;
    out.push_back(c);
  };
  for (Algorithm a : {Algorithm::lasso, Algorithm::ridge, Algorithm::mlp})
    for (Representation r : {Representation::raw, Representation::distributed})
      push(Setting::time_aggregated, a, 0, r);
  for (size_t t : {size_t(12), size_t(36), size_t(72)})
    for (Algorithm a :
         {Algorithm::lstm, Algorithm::gru, Algorithm::lstm_attn, Algorithm::gru_attn})
      for (Representation r : {Representation::raw, Representation::distributed})
        push(Setting::time_series, a, t, r);
  return out;
}

// Marks the best accuracy/AUC per (setting block, representation).
inline void mark_best_per_group(std::vector<GridResult>& results) {
  auto better = [&](const GridResult& a, const GridResult& b, bool acc) {
    return (acc ? a.accuracy : a.auc) > (acc ? b.accuracy : b.auc);
  };
  for (int setting = 0; setting < 2; ++setting) {
    for (int repr = 0; repr < 2; ++repr) {
      int best_acc = -1, best_auc = -1;
      for (size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (r.failed || static_cast<int>(r.config.setting) != setting ||
            static_cast<int>(r.config.representation) != repr)
          continue;
        if (best_acc < 0 || better(r, results[best_acc], true)) best_acc = static_cast<int>(i);
        if (best_auc < 0 || better(r, results[best_auc], false)) best_auc = static_cast<int>(i);
      }
      if (best_acc >= 0) results[best_acc].best_accuracy = true;
      if (best_auc >= 0) results[best_auc].best_auc = true;
    }
  }
}

inline std::string grid_table_text(const std::vector<GridResult>& results) {
  std::string s =
      "setting\talgorithm\ttimesteps\trepresentation\taccuracy\tauc\tbest_accuracy\tbest_auc\tstatus\n";
  for (const auto& r : results) {
    s += std::string(setting_name(r.config.setting)) + "\t" + algorithm_name(r.config.algorithm) +
         "\t" + (r.config.timesteps ? std::to_string(r.config.timesteps) : "-") + "\t" +
         representation_name(r.config.representation) + "\t";
    if (r.failed)
      s += "\t\t\t\tfailed: " + r.error;
    else
      s += fmt_f(r.accuracy, 6) + "\t" + fmt_f(r.auc, 6) + "\t" +
           (r.best_accuracy ? "1" : "0") + "\t" + (r.best_auc ? "1" : "0") + "\tok";
    s += "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Config-driven training over prepared (raw) feature bundles
// ---------------------------------------------------------------------------

struct PreparedFeatures {
  AggregatedFeatures agg;                  // empty unless aggregated requested
  std::map<size_t, SeriesFeatures> series; // keyed by timesteps
  SplitAssignment split;
  uint64_t dataset_hash = 0;
  AggStat stat = AggStat::mean;
};

inline PreparedFeatures prepare_features(const Dataset& ds, const std::vector<FbtEpisode>& eps,
                                         bool need_aggregated,
                                         const std::vector<size_t>& series_timesteps,
                                         uint64_t split_seed, AggStat stat = AggStat::mean) {
  PreparedFeatures out;
  out.stat = stat;
  std::vector<int> labels;
  for (const auto& e : eps)
    if (e.included) labels.push_back(e.label);
  out.split = split_episodes(labels, split_seed);
  if (!need_aggregated && series_timesteps.empty())
    throw FbtError("prepare_features: nothing requested");
  if (need_aggregated) out.agg = build_aggregated(ds, eps, stat);
  for (size_t t : series_timesteps) out.series.emplace(t, build_series(ds, eps, t, stat));
  uint64_t h = fnv1a64(serialize_episodes(eps));
  h ^= fnv1a64(serialize_split(need_aggregated ? out.agg.ids
                                               : out.series.begin()->second.ids,
                               out.split));
  out.dataset_hash = h;
  return out;
}

// Fits normalization on the train partition, trains per config, and embeds
// the stats into the returned artifact.
inline TrainOutcome train_for_config(const ExperimentConfig& cfg, const PreparedFeatures& prep) {
  cfg.validate();
  const auto train_rows = prep.split.rows(Partition::train);
  TrainOutcome out;
  if (cfg.setting == Setting::time_aggregated) {
    const AggregatedFeatures& raw = prep.agg;
    if (raw.ids.empty()) throw FbtError("aggregated features not prepared");
    NormalizationStats norm = fit_normalization(raw, train_rows);
    AggregatedFeatures normed = raw;
    apply_normalization(normed, norm);
    out = algorithm_is_linear(cfg.algorithm)
              ? train_linear(cfg, normed, prep.split, prep.dataset_hash)
              : train_net(cfg, &normed, nullptr, prep.split, prep.dataset_hash);
    out.artifact.norm = std::move(norm);
  } else {
    auto it = prep.series.find(cfg.timesteps);
    if (it == prep.series.end())
      throw FbtError("series features for T=" + std::to_string(cfg.timesteps) + " not prepared");
    const SeriesFeatures& raw = it->second;
    NormalizationStats norm = fit_normalization(raw, train_rows);
    SeriesFeatures normed = raw;
    apply_normalization(normed, norm);
    out = train_net(cfg, nullptr, &normed, prep.split, prep.dataset_hash);
    out.artifact.norm = std::move(norm);
  }
  out.artifact.agg_stat = prep.stat;
  return out;
}

inline EvalReport evaluate_for_config(ModelArtifact& art, const PreparedFeatures& prep,
                                      Partition part = Partition::test) {
  if (art.config.setting == Setting::time_aggregated)
    return evaluate_artifact(art, &prep.agg, nullptr, prep.split, part);
  return evaluate_artifact(art, nullptr, &prep.series.at(art.config.timesteps), prep.split, part);
}

// Runs every config; a failed cell is recorded and the grid continues.
inline std::vector<GridResult> run_experiment_grid(const std::vector<ExperimentConfig>& configs,
                                                   const PreparedFeatures& prep,
                                                   std::string* log = nullptr) {
  std::vector<GridResult> results;
  for (const auto& cfg : configs) {
    GridResult r;
    r.config = cfg;
    try {
      TrainOutcome to = train_for_config(cfg, prep);
      EvalReport rep = evaluate_for_config(to.artifact, prep);
      r.accuracy = rep.accuracy;
      r.auc = rep.auc;
      if (log)
        *log += std::string("cell ") + setting_name(cfg.setting) + "/" +
                algorithm_name(cfg.algorithm) + "/T=" + std::to_string(cfg.timesteps) + "/" +
                representation_name(cfg.representation) + " acc=" + fmt_f(rep.accuracy, 6) +
                " auc=" + fmt_f(rep.auc, 6) + " epochs=" + std::to_string(to.epochs_run) + "\n";
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      if (log)
        *log += std::string("cell ") + algorithm_name(cfg.algorithm) + " failed: " + e.what() +
                "\n";
    }
    results.push_back(std::move(r));
  }
  mark_best_per_group(results);
  return results;
}

inline std::string grid_summary_text(const std::vector<GridResult>& results) {
  std::ostringstream os;
  os << "model performance (test split)\n";
  os << "  algorithm     timesteps   acc(raw)  acc(dist)  auc(raw)  auc(dist)\n";
  auto find = [&](Algorithm a, size_t t, Representation r) -> const GridResult* {
    for (const auto& res : results)
      if (res.config.algorithm == a && res.config.timesteps == t &&
          res.config.representation == r && !res.failed)
        return &res;
    return nullptr;
  };
  auto fmt_cell = [](const GridResult* r, bool acc) {
    if (!r) return std::string("     -");
    std::string v = fmt_f(acc ? r->accuracy : r->auc, 3);
    v += (acc ? r->best_accuracy : r->best_auc) ? "*" : " ";
    return v;
  };
  std::vector<std::pair<Algorithm, size_t>> rows;
  for (Algorithm a : {Algorithm::lasso, Algorithm::ridge, Algorithm::mlp}) rows.push_back({a, 0});
  for (size_t t : {size_t(12), size_t(36), size_t(72)})
    for (Algorithm a :
         {Algorithm::lstm, Algorithm::gru, Algorithm::lstm_attn, Algorithm::gru_attn})
      rows.push_back({a, t});
  for (auto [a, t] : rows) {
    const GridResult* raw = find(a, t, Representation::raw);
    const GridResult* dist = find(a, t, Representation::distributed);
    if (!raw && !dist) continue;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-13s %-11s %-9s %-10s %-9s %-9s\n",
                  algorithm_name(a), t ? std::to_string(t).c_str() : "-",
                  fmt_cell(raw, true).c_str(), fmt_cell(dist, true).c_str(),
                  fmt_cell(raw, false).c_str(), fmt_cell(dist, false).c_str());
    os << buf;
  }
  os << "  (* = best in its setting/representation group)\n";
  return os.str();
}

}  // namespace fbt
