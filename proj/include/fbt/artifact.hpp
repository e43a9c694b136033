#pragma once

// ModelArtifact: a versioned text container with the architecture descriptor
// (config echo), normalization statistics, and every parameter tensor.
// Values are written with %.17g, so save -> load -> save is byte-identical.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fbt/common.hpp"
#include "fbt/experiment.hpp"
#include "fbt/featurize.hpp"
#include "fbt/linear.hpp"
#include "fbt/nn/model.hpp"

namespace fbt {

struct ModelArtifact {
  ExperimentConfig config;
  size_t input_dim = 0;
  NormalizationStats norm;
  AggStat agg_stat = AggStat::mean;
  uint64_t dataset_hash = 0;

  std::optional<LinearModel> linear;
  std::shared_ptr<Autoencoder> ae;  // linear models with distributed representation
  std::shared_ptr<NetModel> net;

  std::string serialize() const;
  static ModelArtifact deserialize(const std::string& content,
                                   const std::string& path_for_errors = "artifact");
};

namespace artifact_detail {

inline void write_tensor(std::string& s, const std::string& name, const Tensor& t) {
  s += "tensor " + name;
  for (size_t d : t.shape) s += " " + std::to_string(d);
  s += "\n";
  const size_t cols = t.shape.empty() ? t.data.size() : t.data.size() / t.shape[0];
  for (size_t i = 0; i < t.data.size(); ++i) {
    s += fmt_g17(t.data[i]);
    s += ((i + 1) % cols == 0) ? '\n' : ' ';
  }
  if (t.data.empty()) s += "\n";
}

}  // namespace artifact_detail

inline std::string ModelArtifact::serialize() const {
  std::string s = "fbt-artifact v1\n";
  for (const auto& [k, v] : config.echo_pairs()) s += "cfg " + k + "=" + v + "\n";
  s += "input_dim=" + std::to_string(input_dim) + "\n";
  s += "agg_stat=" + std::string(agg_stat_name(agg_stat)) + "\n";
  s += "dataset_hash=" + hex64(dataset_hash) + "\n";
  s += "kind=" + std::string(linear ? "linear" : "net") + "\n";
  s += "[normalization]\n";
  s += "columns=" + std::to_string(norm.columns.size()) + "\n";
  for (size_t c = 0; c < norm.columns.size(); ++c)
    s += norm.columns[c] + "\t" + fmt_g17(norm.min[c]) + "\t" + fmt_g17(norm.max[c]) + "\t" +
         fmt_g17(norm.median[c]) + "\n";
  s += "[tensors]\n";
  if (linear) {
    s += "penalty=" + std::string(penalty_name(linear->penalty)) + "\n";
    s += "lambda=" + fmt_g17(linear->lambda) + "\n";
    s += "iterations=" + std::to_string(linear->iterations) + "\n";
    s += "converged=" + std::string(linear->converged ? "1" : "0") + "\n";
    s += "objective=" + fmt_g17(linear->final_objective) + "\n";
    if (ae) {
      auto params = autoencoder_params(*ae);
      for (const auto& p : params) artifact_detail::write_tensor(s, p.name, *p.value);
    }
    Tensor w(1, linear->weights.size());
    w.data.assign(linear->weights.begin(), linear->weights.end());
    artifact_detail::write_tensor(s, "linear.w", w);
    Tensor b({1});
    b.data[0] = linear->intercept;
    artifact_detail::write_tensor(s, "linear.b", b);
  } else if (net) {
    auto params = const_cast<NetModel*>(net.get())->params();
    for (const auto& p : params) artifact_detail::write_tensor(s, p.name, *p.value);
  } else {
    throw FbtError("artifact holds no model");
  }
  s += "end\n";
  return s;
}

inline ModelArtifact ModelArtifact::deserialize(const std::string& content,
                                                const std::string& path) {
  auto lines = read_lines_from_string(content);
  if (lines.empty() || lines[0] != "fbt-artifact v1")
    throw FbtError(path + ": not a recognized artifact file");
  ModelArtifact art;
  size_t i = 1;
  std::string kind;
  for (; i < lines.size(); ++i) {
    const std::string& ln = lines[i];
    if (ln == "[normalization]") break;
    if (ln.rfind("cfg ", 0) == 0) {
      const auto eq = ln.find('=');
      if (eq == std::string::npos) throw FbtError(path + ": bad cfg line");
      const std::string key = ln.substr(4, eq - 4);
      if (!art.config.apply_kv(key, ln.substr(eq + 1)))
        throw FbtError(path + ": unknown cfg key " + key);
    } else if (ln.rfind("input_dim=", 0) == 0) {
      int64_t v;
      if (!parse_int64(ln.substr(10), v)) throw FbtError(path + ": bad input_dim");
      art.input_dim = static_cast<size_t>(v);
    } else if (ln.rfind("agg_stat=", 0) == 0) {
      art.agg_stat = ln.substr(9) == "last" ? AggStat::last : AggStat::mean;
    } else if (ln.rfind("dataset_hash=", 0) == 0) {
      art.dataset_hash = std::stoull(ln.substr(13), nullptr, 16);
    } else if (ln.rfind("kind=", 0) == 0) {
      kind = ln.substr(5);
    } else {
      throw FbtError(path + ": unexpected line: " + ln);
    }
  }
  if (i >= lines.size()) throw FbtError(path + ": missing normalization block");
  ++i;
  if (i >= lines.size() || lines[i].rfind("columns=", 0) != 0)
    throw FbtError(path + ": missing columns count");
  int64_t ncols;
  if (!parse_int64(lines[i].substr(8), ncols)) throw FbtError(path + ": bad columns count");
  ++i;
  for (int64_t c = 0; c < ncols; ++c, ++i) {
    auto cells = split(lines[i], '\t');
    if (cells.size() != 4) throw FbtError(path + ": bad normalization row");
    art.norm.columns.push_back(cells[0]);
    double mn, mx, md;
    if (!parse_double(cells[1], mn) || !parse_double(cells[2], mx) || !parse_double(cells[3], md))
      throw FbtError(path + ": bad normalization value");
    art.norm.min.push_back(mn);
    art.norm.max.push_back(mx);
    art.norm.median.push_back(md);
  }
  if (i >= lines.size() || lines[i] != "[tensors]")
    throw FbtError(path + ": missing tensors block");
  ++i;

  // collect raw tensors and scalar attributes
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string penalty_s, lambda_s, iters_s, converged_s;
  for (; i < lines.size() && lines[i] != "end";) {
    const std::string& ln = lines[i];
    if (ln.rfind("penalty=", 0) == 0) {
      penalty_s = ln.substr(8);
      ++i;
    } else if (ln.rfind("lambda=", 0) == 0) {
      lambda_s = ln.substr(7);
      ++i;
    } else if (ln.rfind("iterations=", 0) == 0) {
      iters_s = ln.substr(11);
      ++i;
    } else if (ln.rfind("converged=", 0) == 0) {
      converged_s = ln.substr(10);
      ++i;
    } else if (ln.rfind("objective=", 0) == 0) {
      ++i;  // informational
    } else if (ln.rfind("tensor ", 0) == 0) {
      auto head = split(ln, ' ');
      Tensor t;
      size_t numel = 1;
      for (size_t d = 2; d < head.size(); ++d) {
        int64_t v;
        if (!parse_int64(head[d], v)) throw FbtError(path + ": bad tensor shape");
        t.shape.push_back(static_cast<size_t>(v));
        numel *= static_cast<size_t>(v);
      }
      ++i;
      t.data.reserve(numel);
      while (t.data.size() < numel && i < lines.size()) {
        for (const auto& cell : split(lines[i], ' ')) {
          if (cell.empty()) continue;
          double v;
          if (!parse_double(cell, v)) throw FbtError(path + ": bad tensor value");
          t.data.push_back(v);
        }
        ++i;
      }
      if (t.data.size() != numel) throw FbtError(path + ": tensor size mismatch for " + head[1]);
      tensors.emplace_back(head[1], std::move(t));
    } else {
      throw FbtError(path + ": unexpected line in tensors block: " + ln);
    }
  }
  if (i >= lines.size()) throw FbtError(path + ": missing end marker");

  if (kind == "linear") {
    LinearModel m;
    m.penalty = penalty_s == "l1" ? Penalty::l1 : Penalty::l2;
    if (!parse_double(lambda_s, m.lambda)) throw FbtError(path + ": bad lambda");
    int64_t it;
    if (!parse_int64(iters_s, it)) throw FbtError(path + ": bad iterations");
    m.iterations = static_cast<size_t>(it);
    m.converged = converged_s == "1";
    bool has_ae = false;
    for (auto& [name, t] : tensors) {
      if (name == "linear.w")
        m.weights = t.data;
      else if (name == "linear.b")
        m.intercept = t.data[0];
      else if (name.rfind("ae.", 0) == 0)
        has_ae = true;
    }
    if (has_ae) {
      art.ae = std::make_shared<Autoencoder>();
      Rng dummy(0);
      art.ae->init(art.input_dim, {art.config.ae_hidden_aggregated},
                   art.config.ae_bottleneck_aggregated, dummy);
      auto params = autoencoder_params(*art.ae);
      size_t pi = 0;
      for (auto& [name, t] : tensors) {
        if (name.rfind("ae.", 0) != 0) continue;
        if (pi >= params.size() || params[pi].name != name ||
            params[pi].value->numel() != t.numel())
          throw FbtError(path + ": autoencoder tensor mismatch: " + name);
        params[pi].value->data = std::move(t.data);
        ++pi;
      }
      if (pi != params.size()) throw FbtError(path + ": incomplete autoencoder tensors");
    }
    art.linear = std::move(m);
  } else if (kind == "net") {
    art.net = std::make_shared<NetModel>(art.config, art.input_dim);
    auto params = art.net->params();
    if (params.size() != tensors.size())
      throw FbtError(path + ": tensor count does not match architecture");
    for (size_t p = 0; p < params.size(); ++p) {
      if (params[p].name != tensors[p].first)
        throw FbtError(path + ": tensor name mismatch: " + tensors[p].first);
      if (params[p].value->numel() != tensors[p].second.numel())
        throw FbtError(path + ": tensor shape mismatch: " + tensors[p].first);
      params[p].value->data = std::move(tensors[p].second.data);
    }
  } else {
    throw FbtError(path + ": unknown artifact kind: " + kind);
  }
  return art;
}

}  // namespace fbt
