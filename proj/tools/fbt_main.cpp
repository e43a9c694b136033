// fbt: command-line pipeline for predicting blood-pressure response to fluid
// bolus therapy. Stage-per-subcommand with file handoff; no hidden state.
//
// Exit codes: 0 all requested artifacts produced, 1 runtime/input error,
// 2 configuration validation error.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbt/fbt.hpp"

namespace fs = std::filesystem;
using namespace fbt;

namespace {

struct CliState {
  std::string out_dir = "out";
  uint64_t seed = 1;
  std::string setting = "time_aggregated";
  std::string algorithm = "lasso";
  std::string representation = "raw";
  size_t timesteps = 0;
  std::string agg_stat = "mean";
  int64_t map_lookback = kMapLookbackMin;

  ExperimentConfig exp;  // numeric hyperparameters bound directly

  // synthetic generation
  size_t n_patients = 500;
  std::string signal_mode = "none";
  double signal_strength = 0.8;
  double missingness = 0.1;
  double prevalence = 0.5;

  // stage paths (empty -> default under out_dir)
  std::string patients, events, manifest, episodes, features, split_path, artifact;
  std::string eval_report, attention_report, results_table, results_summary;
  size_t attention_sample = kAttentionSampleDefault;

  // grid restriction (comma lists; empty -> full grid)
  std::string grid_algorithms, grid_timesteps, grid_representations;
};

std::string path_or(const std::string& explicit_path, const std::string& out_dir,
                    const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  return (fs::path(out_dir) / name).string();
}

void require_input(const std::string& path, const char* what) {
  if (!file_exists(path))
    throw FbtError(std::string("missing ") + what + " file: " + path +
                   " (run the producing stage first or pass the path explicitly)");
}

// Resolves the ExperimentConfig from flags; throws on conflicts before work.
ExperimentConfig resolve_experiment(const CliState& st) {
  ExperimentConfig cfg = st.exp;
  if (!parse_setting(st.setting, cfg.setting)) throw FbtError("bad --setting: " + st.setting);
  if (!parse_algorithm(st.algorithm, cfg.algorithm))
    throw FbtError("bad --algorithm: " + st.algorithm);
  if (!parse_representation(st.representation, cfg.representation))
    throw FbtError("bad --representation: " + st.representation);
  cfg.timesteps = st.timesteps;
  cfg.seed = st.seed;
  cfg.validate();
  return cfg;
}

AggStat resolve_agg_stat(const CliState& st) {
  if (st.agg_stat == "mean") return AggStat::mean;
  if (st.agg_stat == "last") return AggStat::last;
  throw FbtError("bad --agg-stat: " + st.agg_stat + " (expected mean or last)");
}

std::string state_echo(const CliState& st) {
  std::string s;
  s += "out_dir=" + st.out_dir + "\n";
  s += "seed=" + std::to_string(st.seed) + "\n";
  s += "setting=" + st.setting + "\nalgorithm=" + st.algorithm +
       "\nrepresentation=" + st.representation + "\ntimesteps=" + std::to_string(st.timesteps) +
       "\n";
  s += "agg_stat=" + st.agg_stat + "\nmap_lookback=" + std::to_string(st.map_lookback) + "\n";
  s += "n_patients=" + std::to_string(st.n_patients) + "\nsignal_mode=" + st.signal_mode +
       "\nsignal_strength=" + fmt_g(st.signal_strength, 6) +
       "\nmissingness=" + fmt_g(st.missingness, 6) + "\nprevalence=" + fmt_g(st.prevalence, 6) +
       "\n";
  return s;
}

struct StageLogger {
  std::string text;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit StageLogger(const std::string& stage, const CliState& st) {
    text = "stage=" + stage + "\n" + state_echo(st);
  }
  void note(const std::string& line) { text += line + "\n"; }
  void wrote(const std::string& path, const std::string& content) {
    write_file(path, content);
    text += "artifact=" + path + " bytes=" + std::to_string(content.size()) +
            " fnv1a64=" + hex64(fnv1a64(content)) + "\n";
  }
  void finish(const std::string& log_path) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    text += "wall_seconds=" + fmt_g(secs, 6) + "\n";
    write_file(log_path, text);
  }
};

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& item : split(s, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

int cmd_generate(CliState& st) {
  SynthConfig cfg;
  cfg.n_patients = st.n_patients;
  cfg.seed = st.seed;
  if (!parse_signal_mode(st.signal_mode, cfg.signal_mode))
    throw FbtError("bad --signal-mode: " + st.signal_mode);
  cfg.signal_strength = st.signal_strength;
  cfg.missingness = st.missingness;
  cfg.prevalence = st.prevalence;

  fs::create_directories(st.out_dir);
  StageLogger log("generate", st);
  SynthOutput out = generate_synthetic(cfg);
  log.wrote(path_or(st.patients, st.out_dir, "patients.csv"), out.patients_text);
  log.wrote(path_or(st.events, st.out_dir, "events.csv"), out.events_text);
  log.wrote(path_or(st.manifest, st.out_dir, "manifest.tsv"), out.manifest_text);
  log.finish((fs::path(st.out_dir) / "generate.log").string());
  return 0;
}

int cmd_ingest(CliState& st) {
  const std::string patients = path_or(st.patients, st.out_dir, "patients.csv");
  const std::string events = path_or(st.events, st.out_dir, "events.csv");
  require_input(patients, "patients");
  require_input(events, "events");
  fs::create_directories(st.out_dir);
  StageLogger log("ingest", st);
  IngestReport report;
  Dataset ds = load_dataset(patients, events, &report);
  log.note("patients=" + std::to_string(ds.patients.size()));
  log.wrote((fs::path(st.out_dir) / "ingest_report.txt").string(), report.text());
  log.finish((fs::path(st.out_dir) / "ingest.log").string());
  return 0;
}

int cmd_cohort(CliState& st) {
  const std::string patients = path_or(st.patients, st.out_dir, "patients.csv");
  const std::string events = path_or(st.events, st.out_dir, "events.csv");
  require_input(patients, "patients");
  require_input(events, "events");
  fs::create_directories(st.out_dir);
  StageLogger log("cohort", st);
  IngestReport report;
  Dataset ds = load_dataset(patients, events, &report);
  auto episodes = select_cohort(ds, st.map_lookback);
  log.wrote((fs::path(st.out_dir) / "ingest_report.txt").string(), report.text());
  log.wrote(path_or(st.episodes, st.out_dir, "episodes.tsv"), serialize_episodes(episodes));
  log.wrote((fs::path(st.out_dir) / "cohort_report.txt").string(),
            cohort_report_text(episodes));
  log.finish((fs::path(st.out_dir) / "cohort.log").string());
  return 0;
}

int cmd_featurize(CliState& st) {
  ExperimentConfig cfg = st.exp;
  if (!parse_setting(st.setting, cfg.setting)) throw FbtError("bad --setting: " + st.setting);
  cfg.timesteps = st.timesteps;
  cfg.seed = st.seed;
  if (cfg.setting == Setting::time_series) {
    if (cfg.timesteps != 12 && cfg.timesteps != 36 && cfg.timesteps != 72)
      throw FbtError("time_series requires timesteps in {12, 36, 72}");
  } else if (cfg.timesteps != 0) {
    throw FbtError("timesteps is only valid for the time_series setting");
  }
  const AggStat stat = resolve_agg_stat(st);
  const std::string patients = path_or(st.patients, st.out_dir, "patients.csv");
  const std::string events = path_or(st.events, st.out_dir, "events.csv");
  const std::string episodes_path = path_or(st.episodes, st.out_dir, "episodes.tsv");
  require_input(patients, "patients");
  require_input(events, "events");
  require_input(episodes_path, "episodes");
  fs::create_directories(st.out_dir);
  StageLogger log("featurize", st);
  Dataset ds = load_dataset(patients, events);
  auto episodes = parse_episodes(read_file(episodes_path), episodes_path);

  const bool series = cfg.setting == Setting::time_series;
  PreparedFeatures prep =
      prepare_features(ds, episodes, !series,
                       series ? std::vector<size_t>{cfg.timesteps} : std::vector<size_t>{},
                       cfg.seed, stat);
  const auto train_rows = prep.split.rows(Partition::train);
  log.wrote((fs::path(st.out_dir) / "schema.txt").string(),
            FeatureSchema::instance().schema_file_text());
  if (series) {
    const auto& f = prep.series.at(cfg.timesteps);
    NormalizationStats norm = fit_normalization(f, train_rows);
    for (const auto& w : norm.warnings) log.note("warning: " + w);
    const std::string tag = "T" + std::to_string(cfg.timesteps);
    log.wrote(path_or(st.features, st.out_dir, "features_series_" + tag + ".tsv"),
              serialize_series(f));
    log.wrote((fs::path(st.out_dir) / ("norm_series_" + tag + ".tsv")).string(),
              serialize_norm_stats(norm));
    log.wrote(path_or(st.split_path, st.out_dir, "split.tsv"),
              serialize_split(f.ids, prep.split));
  } else {
    NormalizationStats norm = fit_normalization(prep.agg, train_rows);
    for (const auto& w : norm.warnings) log.note("warning: " + w);
    log.wrote(path_or(st.features, st.out_dir, "features_aggregated.tsv"),
              serialize_aggregated(prep.agg));
    log.wrote((fs::path(st.out_dir) / "norm_aggregated.tsv").string(),
              serialize_norm_stats(norm));
    log.wrote(path_or(st.split_path, st.out_dir, "split.tsv"),
              serialize_split(prep.agg.ids, prep.split));
  }
  log.finish((fs::path(st.out_dir) / "featurize.log").string());
  return 0;
}

// Loads features + split written by cmd_featurize into a PreparedFeatures.
PreparedFeatures load_prepared(const CliState& st, const ExperimentConfig& cfg, AggStat stat) {
  PreparedFeatures prep;
  prep.stat = stat;
  const bool series = cfg.setting == Setting::time_series;
  const std::string features_path = path_or(
      st.features, st.out_dir,
      series ? "features_series_T" + std::to_string(cfg.timesteps) + ".tsv"
             : "features_aggregated.tsv");
  const std::string split_path = path_or(st.split_path, st.out_dir, "split.tsv");
  require_input(features_path, "features");
  require_input(split_path, "split");
  const std::string features_text = read_file(features_path);
  const std::string split_text = read_file(split_path);
  prep.dataset_hash = fnv1a64(features_text) ^ fnv1a64(split_text);
  if (series) {
    SeriesFeatures f = parse_series(features_text, features_path);
    if (f.timesteps != cfg.timesteps)
      throw FbtError(features_path + ": file has T=" + std::to_string(f.timesteps) +
                     " but config requests T=" + std::to_string(cfg.timesteps));
    prep.split = parse_split(split_text, f.ids, split_path);
    prep.series.emplace(cfg.timesteps, std::move(f));
  } else {
    AggregatedFeatures f = parse_aggregated(features_text, features_path);
    prep.split = parse_split(split_text, f.ids, split_path);
    prep.agg = std::move(f);
  }
  return prep;
}

int cmd_train(CliState& st) {
  ExperimentConfig cfg = resolve_experiment(st);
  const AggStat stat = resolve_agg_stat(st);
  PreparedFeatures prep = load_prepared(st, cfg, stat);
  fs::create_directories(st.out_dir);
  StageLogger log("train", st);
  TrainOutcome out = train_for_config(cfg, prep);
  log.text += out.log;
  if (out.epochs_run)
    log.note("epochs_run=" + std::to_string(out.epochs_run) +
             " best_epoch=" + std::to_string(out.best_epoch) +
             " best_val_loss=" + fmt_g(out.best_val_loss, 10));
  log.wrote(path_or(st.artifact, st.out_dir, "artifact.txt"), out.artifact.serialize());
  if (out.artifact.linear) {
    const auto& cols = out.artifact.ae
                           ? [&] {
                               std::vector<std::string> c;
                               for (size_t i = 0; i < out.artifact.linear->weights.size(); ++i)
                                 c.push_back("code_" + std::to_string(i));
                               return c;
                             }()
                           : FeatureSchema::instance().aggregated_columns();
    log.wrote((fs::path(st.out_dir) / "coefficients.tsv").string(),
              coefficient_report(*out.artifact.linear, cols));
  }
  log.finish((fs::path(st.out_dir) / "train.log").string());
  return 0;
}

int cmd_eval(CliState& st) {
  const std::string artifact_path = path_or(st.artifact, st.out_dir, "artifact.txt");
  require_input(artifact_path, "artifact");
  ModelArtifact art = ModelArtifact::deserialize(read_file(artifact_path), artifact_path);
  CliState view = st;
  view.setting = setting_name(art.config.setting);
  view.timesteps = art.config.timesteps;
  PreparedFeatures prep = load_prepared(view, art.config, art.agg_stat);
  fs::create_directories(st.out_dir);
  StageLogger log("eval", st);
  EvalReport rep = evaluate_for_config(art, prep);
  log.note("accuracy=" + fmt_f(rep.accuracy, 6) + " auc=" + fmt_f(rep.auc, 6) +
           " runtime_seconds=" + fmt_g(rep.runtime_seconds, 6));
  log.wrote(path_or(st.eval_report, st.out_dir, "eval_report.txt"), rep.to_file_text());
  log.finish((fs::path(st.out_dir) / "eval.log").string());
  return 0;
}

int cmd_attention(CliState& st) {
  const std::string artifact_path = path_or(st.artifact, st.out_dir, "artifact.txt");
  require_input(artifact_path, "artifact");
  ModelArtifact art = ModelArtifact::deserialize(read_file(artifact_path), artifact_path);
  if (!art.net || !art.net->has_attention())
    throw FbtError(artifact_path + ": artifact has no attention mechanism");
  CliState view = st;
  view.setting = setting_name(art.config.setting);
  view.timesteps = art.config.timesteps;
  PreparedFeatures prep = load_prepared(view, art.config, art.agg_stat);
  fs::create_directories(st.out_dir);
  StageLogger log("attention", st);
  AttentionReport rep = extract_attention_report(
      art, prep.series.at(art.config.timesteps), prep.split, st.attention_sample);
  log.note("sample_size=" + std::to_string(rep.sample_size));
  log.wrote(path_or(st.attention_report, st.out_dir, "attention_report.tsv"),
            rep.to_file_text());
  log.finish((fs::path(st.out_dir) / "attention.log").string());
  return 0;
}

int cmd_grid(CliState& st) {
  const std::string patients = path_or(st.patients, st.out_dir, "patients.csv");
  const std::string events = path_or(st.events, st.out_dir, "events.csv");
  require_input(patients, "patients");
  require_input(events, "events");
  const AggStat stat = resolve_agg_stat(st);

  ExperimentConfig base = st.exp;
  base.seed = st.seed;
  std::vector<ExperimentConfig> configs = grid_configs(base);

  // optional restriction of the grid
  auto algos = split_csv_list(st.grid_algorithms);
  auto steps = split_csv_list(st.grid_timesteps);
  auto reps = split_csv_list(st.grid_representations);
  auto keep = [&](const ExperimentConfig& c) {
    auto match_any = [](const std::vector<std::string>& list, const std::string& v) {
      if (list.empty()) return true;
      for (const auto& s : list)
        if (s == v) return true;
      return false;
    };
    if (!match_any(algos, algorithm_name(c.algorithm))) return false;
    if (!match_any(reps, representation_name(c.representation))) return false;
    if (c.setting == Setting::time_series &&
        !match_any(steps, std::to_string(c.timesteps)))
      return false;
    return true;
  };
  std::vector<ExperimentConfig> selected;
  for (const auto& c : configs)
    if (keep(c)) selected.push_back(c);
  if (selected.empty()) throw FbtError("grid restriction selected no cells");

  fs::create_directories(st.out_dir);
  StageLogger log("grid", st);
  Dataset ds = load_dataset(patients, events);
  auto episodes = select_cohort(ds, st.map_lookback);
  bool need_agg = false;
  std::vector<size_t> need_ts;
  for (const auto& c : selected) {
    if (c.setting == Setting::time_aggregated)
      need_agg = true;
    else if (std::find(need_ts.begin(), need_ts.end(), c.timesteps) == need_ts.end())
      need_ts.push_back(c.timesteps);
  }
  std::sort(need_ts.begin(), need_ts.end());
  PreparedFeatures prep = prepare_features(ds, episodes, need_agg, need_ts, st.seed, stat);
  std::string cell_log;
  auto results = run_experiment_grid(selected, prep, &cell_log);
  log.text += cell_log;
  log.wrote(path_or(st.results_table, st.out_dir, "results_table.tsv"),
            grid_table_text(results));
  log.wrote(path_or(st.results_summary, st.out_dir, "results_summary.txt"),
            grid_summary_text(results));
  log.finish((fs::path(st.out_dir) / "grid.log").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluid bolus therapy response prediction pipeline"};
  app.require_subcommand(1);
  CliState st;

  app.set_config("--config", "", "flat key=value config file; flags override file values");
  app.add_option("--out-dir", st.out_dir, "output directory for stage artifacts");
  app.add_option("--seed", st.seed, "master seed for all stage randomness");
  app.add_option("--setting", st.setting, "time_aggregated | time_series");
  app.add_option("--algorithm", st.algorithm,
                 "lasso | ridge | mlp | lstm | gru | lstm_attn | gru_attn");
  app.add_option("--representation", st.representation, "raw | distributed");
  app.add_option("--timesteps", st.timesteps, "series timesteps: 12, 36, or 72");
  app.add_option("--agg-stat", st.agg_stat, "window/bin aggregator: mean | last");
  app.add_option("--map-lookback", st.map_lookback,
                 "minutes of lookback for MAP at FBT start (default 60)");

  app.add_option("--lr", st.exp.lr, "learning rate");
  app.add_option("--batch-size", st.exp.batch_size, "minibatch size");
  app.add_option("--epochs", st.exp.epochs, "maximum training epochs");
  app.add_option("--patience", st.exp.patience, "early-stopping patience (epochs)");
  app.add_option("--rnn-hidden", st.exp.rnn_hidden, "recurrent hidden size");
  app.add_option("--rnn-layers", st.exp.rnn_layers, "stacked recurrent layers");
  app.add_option("--rnn-dropout", st.exp.rnn_dropout, "dropout between recurrent layers");
  app.add_option("--mlp-hidden", st.exp.mlp_hidden, "MLP hidden width");
  app.add_option("--mlp-dropout", st.exp.mlp_dropout, "MLP dropout rate");
  app.add_option("--attention-dim", st.exp.attention_dim, "attention projection size");
  app.add_option("--lambda-recon", st.exp.lambda_recon, "reconstruction loss weight");
  app.add_option("--ae-pretrain-epochs", st.exp.ae_pretrain_epochs,
                 "autoencoder pretraining epochs for linear models");
  app.add_option("--linear-lambda", st.exp.linear_lambda,
                 "regularization strength; negative selects on the validation split");
  app.add_option("--linear-tol", st.exp.linear_tol, "linear solver tolerance");
  app.add_option("--linear-max-iter", st.exp.linear_max_iter, "linear solver iteration cap");

  app.add_option("--n-patients", st.n_patients, "synthetic cohort size");
  app.add_option("--signal-mode", st.signal_mode, "none | static_sparse | temporal_late");
  app.add_option("--signal-strength", st.signal_strength, "planted signal strength in [0,1]");
  app.add_option("--missingness", st.missingness, "missingness rate in [0,1]");
  app.add_option("--prevalence", st.prevalence, "target success prevalence");

  app.add_option("--patients", st.patients, "patients csv path");
  app.add_option("--events", st.events, "events csv path");
  app.add_option("--manifest", st.manifest, "synthetic manifest path");
  app.add_option("--episodes", st.episodes, "episodes tsv path");
  app.add_option("--features", st.features, "feature matrix path");
  app.add_option("--split", st.split_path, "split assignment path");
  app.add_option("--artifact", st.artifact, "model artifact path");
  app.add_option("--eval-report", st.eval_report, "evaluation report path");
  app.add_option("--attention-report", st.attention_report, "attention report path");
  app.add_option("--results-table", st.results_table, "grid results table path");
  app.add_option("--results-summary", st.results_summary, "grid summary path");
  app.add_option("--attention-sample", st.attention_sample,
                 "test cases averaged in the attention report");

  app.add_option("--grid-algorithms", st.grid_algorithms, "comma list restricting grid cells");
  app.add_option("--grid-timesteps", st.grid_timesteps, "comma list restricting series T");
  app.add_option("--grid-representations", st.grid_representations,
                 "comma list restricting representations");

  struct Sub {
    const char* name;
    const char* desc;
    int (*fn)(CliState&);
  };
  const Sub subs[] = {
      {"generate", "write a synthetic cohort (patients, events, manifest)", cmd_generate},
      {"ingest", "parse and validate input files, write the ingest report", cmd_ingest},
      {"cohort", "apply cohort criteria and label episodes", cmd_cohort},
      {"featurize", "build features, split, and normalization stats", cmd_featurize},
      {"train", "train one configuration, write the model artifact", cmd_train},
      {"eval", "evaluate an artifact on the test split", cmd_eval},
      {"grid", "run the experiment grid, write the results table", cmd_grid},
      {"attention", "export mean attention weights per timestep", cmd_attention},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.desc)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& s : subs)
      if (app.got_subcommand(s.name)) return s.fn(st);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const FbtError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string msg = e.what();
    const bool config_error = msg.find("requires") != std::string::npos ||
                              msg.find("bad --") != std::string::npos ||
                              msg.find("only valid") != std::string::npos;
    return config_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
