#pragma once

// Experiment configuration shared by training, evaluation, and the CLI.

#include <cstdint>
#include <string>
#include <vector>

#include "fbt/common.hpp"

namespace fbt {

enum class Setting { time_aggregated, time_series };
enum class Algorithm { lasso, ridge, mlp, lstm, gru, lstm_attn, gru_attn };
enum class Representation { raw, distributed };

inline const char* setting_name(Setting s) {
  return s == Setting::time_aggregated ? "time_aggregated" : "time_series";
}

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::lasso: return "lasso";
    case Algorithm::ridge: return "ridge";
    case Algorithm::mlp: return "mlp";
    case Algorithm::lstm: return "lstm";
    case Algorithm::gru: return "gru";
    case Algorithm::lstm_attn: return "lstm_attn";
    default: return "gru_attn";
  }
}

inline const char* representation_name(Representation r) {
  return r == Representation::raw ? "raw" : "distributed";
}

inline bool parse_setting(const std::string& s, Setting& out) {
  if (s == "time_aggregated") {
    out = Setting::time_aggregated;
    return true;
  }
  if (s == "time_series") {
    out = Setting::time_series;
    return true;
  }
  return false;
}

inline bool parse_algorithm(const std::string& s, Algorithm& out) {
  for (Algorithm a : {Algorithm::lasso, Algorithm::ridge, Algorithm::mlp, Algorithm::lstm,
                      Algorithm::gru, Algorithm::lstm_attn, Algorithm::gru_attn}) {
    if (s == algorithm_name(a)) {
      out = a;
      return true;
    }
  }
  return false;
}

inline bool parse_representation(const std::string& s, Representation& out) {
  if (s == "raw") {
    out = Representation::raw;
    return true;
  }
  if (s == "distributed") {
    out = Representation::distributed;
    return true;
  }
  return false;
}

inline bool algorithm_is_series(Algorithm a) {
  return a == Algorithm::lstm || a == Algorithm::gru || a == Algorithm::lstm_attn ||
         a == Algorithm::gru_attn;
}

inline bool algorithm_is_linear(Algorithm a) {
  return a == Algorithm::lasso || a == Algorithm::ridge;
}

inline bool algorithm_has_attention(Algorithm a) {
  return a == Algorithm::lstm_attn || a == Algorithm::gru_attn;
}

struct ExperimentConfig {
  Setting setting = Setting::time_aggregated;
  Algorithm algorithm = Algorithm::lasso;
  Representation representation = Representation::raw;
  size_t timesteps = 0;  // series only; one of 12, 36, 72

  // optimization
  double lr = 1e-3;
  double rmsprop_rho = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double opt_eps = 1e-8;
  size_t batch_size = 64;
  size_t epochs = 100;
  size_t patience = 5;

  // architecture
  size_t mlp_hidden = 64;
  double mlp_dropout = 0.5;
  size_t rnn_hidden = 32;
  size_t rnn_layers = 3;
  double rnn_dropout = 0.0;
  size_t attention_dim = 32;
  size_t ae_bottleneck_aggregated = 32;
  size_t ae_bottleneck_series = 25;
  size_t ae_hidden_aggregated = 64;
  size_t ae_hidden_series = 48;
  double lambda_recon = 1.0;
  size_t ae_pretrain_epochs = 30;  // linear models with distributed representation

  // linear solver
  double linear_lambda = -1.0;  // < 0 selects on the validation split
  double linear_tol = 1e-8;
  size_t linear_max_iter = 200000;

  uint64_t seed = 1;

  void validate() const {
    if (setting == Setting::time_aggregated) {
      if (timesteps != 0)
        throw FbtError("timesteps is only valid for the time_series setting");
      if (algorithm_is_series(algorithm))
        throw FbtError(std::string(algorithm_name(algorithm)) +
                       " requires the time_series setting");
    } else {
      if (timesteps != 12 && timesteps != 36 && timesteps != 72)
        throw FbtError("time_series requires timesteps in {12, 36, 72}");
      if (!algorithm_is_series(algorithm))
        throw FbtError(std::string(algorithm_name(algorithm)) +
                       " requires the time_aggregated setting");
    }
  }

  // Sets one field from its echo key; returns false for unknown keys.
  bool apply_kv(const std::string& key, const std::string& value) {
    auto as_u64 = [&](size_t& field) {
      int64_t v;
      if (!parse_int64(value, v) || v < 0) throw FbtError("bad value for " + key + ": " + value);
      field = static_cast<size_t>(v);
    };
    auto as_double = [&](double& field) {
      if (!parse_double(value, field)) throw FbtError("bad value for " + key + ": " + value);
    };
    if (key == "setting") {
      if (!parse_setting(value, setting)) throw FbtError("bad setting: " + value);
    } else if (key == "algorithm") {
      if (!parse_algorithm(value, algorithm)) throw FbtError("bad algorithm: " + value);
    } else if (key == "representation") {
      if (!parse_representation(value, representation))
        throw FbtError("bad representation: " + value);
    } else if (key == "timesteps") {
      as_u64(timesteps);
    } else if (key == "lr") {
      as_double(lr);
    } else if (key == "rmsprop_rho") {
      as_double(rmsprop_rho);
    } else if (key == "adam_beta1") {
      as_double(adam_beta1);
    } else if (key == "adam_beta2") {
      as_double(adam_beta2);
    } else if (key == "opt_eps") {
      as_double(opt_eps);
    } else if (key == "batch_size") {
      as_u64(batch_size);
    } else if (key == "epochs") {
      as_u64(epochs);
    } else if (key == "patience") {
      as_u64(patience);
    } else if (key == "mlp_hidden") {
      as_u64(mlp_hidden);
    } else if (key == "mlp_dropout") {
      as_double(mlp_dropout);
    } else if (key == "rnn_hidden") {
      as_u64(rnn_hidden);
    } else if (key == "rnn_layers") {
      as_u64(rnn_layers);
    } else if (key == "rnn_dropout") {
      as_double(rnn_dropout);
    } else if (key == "attention_dim") {
      as_u64(attention_dim);
    } else if (key == "ae_bottleneck_aggregated") {
      as_u64(ae_bottleneck_aggregated);
    } else if (key == "ae_bottleneck_series") {
      as_u64(ae_bottleneck_series);
    } else if (key == "ae_hidden_aggregated") {
      as_u64(ae_hidden_aggregated);
    } else if (key == "ae_hidden_series") {
      as_u64(ae_hidden_series);
    } else if (key == "lambda_recon") {
      as_double(lambda_recon);
    } else if (key == "ae_pretrain_epochs") {
      as_u64(ae_pretrain_epochs);
    } else if (key == "linear_lambda") {
      as_double(linear_lambda);
    } else if (key == "linear_tol") {
      as_double(linear_tol);
    } else if (key == "linear_max_iter") {
      as_u64(linear_max_iter);
    } else if (key == "seed") {
      int64_t v;
      if (!parse_int64(value, v)) throw FbtError("bad seed: " + value);
      seed = static_cast<uint64_t>(v);
    } else {
      return false;
    }
    return true;
  }

  // Key=value echo, sorted by key; embedded in every output artifact.
  std::vector<std::pair<std::string, std::string>> echo_pairs() const {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"setting", setting_name(setting)},
        {"algorithm", algorithm_name(algorithm)},
        {"representation", representation_name(representation)},
        {"timesteps", std::to_string(timesteps)},
        {"lr", fmt_g17(lr)},
        {"rmsprop_rho", fmt_g17(rmsprop_rho)},
        {"adam_beta1", fmt_g17(adam_beta1)},
        {"adam_beta2", fmt_g17(adam_beta2)},
        {"opt_eps", fmt_g17(opt_eps)},
        {"batch_size", std::to_string(batch_size)},
        {"epochs", std::to_string(epochs)},
        {"patience", std::to_string(patience)},
        {"mlp_hidden", std::to_string(mlp_hidden)},
        {"mlp_dropout", fmt_g17(mlp_dropout)},
        {"rnn_hidden", std::to_string(rnn_hidden)},
        {"rnn_layers", std::to_string(rnn_layers)},
        {"rnn_dropout", fmt_g17(rnn_dropout)},
        {"attention_dim", std::to_string(attention_dim)},
        {"ae_bottleneck_aggregated", std::to_string(ae_bottleneck_aggregated)},
        {"ae_bottleneck_series", std::to_string(ae_bottleneck_series)},
        {"ae_hidden_aggregated", std::to_string(ae_hidden_aggregated)},
        {"ae_hidden_series", std::to_string(ae_hidden_series)},
        {"lambda_recon", fmt_g17(lambda_recon)},
        {"ae_pretrain_epochs", std::to_string(ae_pretrain_epochs)},
        {"linear_lambda", fmt_g17(linear_lambda)},
        {"linear_tol", fmt_g17(linear_tol)},
        {"linear_max_iter", std::to_string(linear_max_iter)},
        {"seed", std::to_string(seed)},
    };
    std::sort(kv.begin(), kv.end());
    return kv;
  }
};

}  // namespace fbt
