#pragma once

// Composite network models for both settings:
//   MLP:  [autoencoder ->] dense(64)+ReLU+dropout x2 -> 2-logit softmax head
//   RNN:  [per-timestep autoencoder ->] stacked LSTM/GRU (3 x 32)
//         -> attention context or final hidden state -> softmax head
// The distributed representation attaches a stacked autoencoder in front and
// adds lambda * reconstruction MSE to the objective (joint training).

#include <string>
#include <vector>

#include "fbt/experiment.hpp"
#include "fbt/nn/attention.hpp"
#include "fbt/nn/autoencoder.hpp"
#include "fbt/nn/gru.hpp"
#include "fbt/nn/layers.hpp"
#include "fbt/nn/lstm.hpp"
#include "fbt/nn/optimizer.hpp"

namespace fbt {

struct LossInfo {
  double total = 0.0;
  double bce = 0.0;
  double recon = 0.0;
};

class NetModel {
 public:
  NetModel(const ExperimentConfig& cfg, size_t input_dim) : cfg_(cfg), input_dim_(input_dim) {
    if (algorithm_is_linear(cfg.algorithm)) throw FbtError("NetModel does not fit linear models");
    Rng rng(derive_seed(cfg.seed, 0x1217));
    const bool series = cfg.setting == Setting::time_series;
    if (cfg.representation == Representation::distributed) {
      has_ae_ = true;
      const size_t hidden = series ? cfg.ae_hidden_series : cfg.ae_hidden_aggregated;
      const size_t code = series ? cfg.ae_bottleneck_series : cfg.ae_bottleneck_aggregated;
      ae_.init(input_dim_, {hidden}, code, rng);
      core_input_dim_ = code;
    } else {
      core_input_dim_ = input_dim_;
    }
    if (series) {
      const bool is_gru = cfg.algorithm == Algorithm::gru || cfg.algorithm == Algorithm::gru_attn;
      is_gru_ = is_gru;
      size_t in = core_input_dim_;
      for (size_t l = 0; l < cfg.rnn_layers; ++l) {
        if (is_gru) {
          gru_.emplace_back();
          gru_.back().init(in, cfg.rnn_hidden, rng);
        } else {
          lstm_.emplace_back();
          lstm_.back().init(in, cfg.rnn_hidden, rng);
        }
        in = cfg.rnn_hidden;
      }
      if (algorithm_has_attention(cfg.algorithm)) {
        has_attention_ = true;
        attn_.init(cfg.rnn_hidden, cfg.attention_dim, rng);
      }
      head_.init(cfg.rnn_hidden, 2, rng);
      inter_dropout_.rate = cfg.rnn_dropout;
    } else {
      fc1_.init(core_input_dim_, cfg.mlp_hidden, rng);
      fc2_.init(cfg.mlp_hidden, cfg.mlp_hidden, rng);
      head_.init(cfg.mlp_hidden, 2, rng);
      drop1_.rate = cfg.mlp_dropout;
      drop2_.rate = cfg.mlp_dropout;
    }
  }

  bool has_attention() const { return has_attention_; }
  bool has_autoencoder() const { return has_ae_; }
  size_t input_dim() const { return input_dim_; }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    auto add = [&](const std::string& name, Tensor& v, Tensor& g, ParamGroup grp) {
      out.push_back({name, &v, &g, grp});
    };
    if (has_ae_) {
      for (size_t i = 0; i < ae_.enc.size(); ++i) {
        add("ae.enc" + std::to_string(i) + ".w", ae_.enc[i].w, ae_.enc[i].gw,
            ParamGroup::autoencoder);
        add("ae.enc" + std::to_string(i) + ".b", ae_.enc[i].b, ae_.enc[i].gb,
            ParamGroup::autoencoder);
      }
      for (size_t i = 0; i < ae_.dec.size(); ++i) {
        add("ae.dec" + std::to_string(i) + ".w", ae_.dec[i].w, ae_.dec[i].gw,
            ParamGroup::autoencoder);
        add("ae.dec" + std::to_string(i) + ".b", ae_.dec[i].b, ae_.dec[i].gb,
            ParamGroup::autoencoder);
      }
    }
    for (size_t l = 0; l < lstm_.size(); ++l) {
      const std::string p = "lstm.l" + std::to_string(l) + ".";
      add(p + "w", lstm_[l].w, lstm_[l].gw, ParamGroup::classifier);
      add(p + "u", lstm_[l].u, lstm_[l].gu, ParamGroup::classifier);
      add(p + "b", lstm_[l].b, lstm_[l].gb, ParamGroup::classifier);
    }
    for (size_t l = 0; l < gru_.size(); ++l) {
      const std::string p = "gru.l" + std::to_string(l) + ".";
      add(p + "w", gru_[l].w, gru_[l].gw, ParamGroup::classifier);
      add(p + "u_zr", gru_[l].u_zr, gru_[l].gu_zr, ParamGroup::classifier);
      add(p + "u_c", gru_[l].u_c, gru_[l].gu_c, ParamGroup::classifier);
      add(p + "b", gru_[l].b, gru_[l].gb, ParamGroup::classifier);
    }
    if (has_attention_) {
      add("attn.wa", attn_.wa, attn_.gwa, ParamGroup::classifier);
      add("attn.va", attn_.va, attn_.gva, ParamGroup::classifier);
    }
    if (cfg_.setting == Setting::time_aggregated) {
      add("mlp.fc1.w", fc1_.w, fc1_.gw, ParamGroup::classifier);
      add("mlp.fc1.b", fc1_.b, fc1_.gb, ParamGroup::classifier);
      add("mlp.fc2.w", fc2_.w, fc2_.gw, ParamGroup::classifier);
      add("mlp.fc2.b", fc2_.b, fc2_.gb, ParamGroup::classifier);
    }
    add("head.w", head_.w, head_.gw, ParamGroup::classifier);
    add("head.b", head_.b, head_.gb, ParamGroup::classifier);
    return out;
  }

  void zero_grads() {
    if (has_ae_) ae_.zero_grads();
    for (auto& l : lstm_) l.zero_grads();
    for (auto& l : gru_) l.zero_grads();
    if (has_attention_) attn_.zero_grads();
    fc1_.zero_grads();
    fc2_.zero_grads();
    head_.zero_grads();
  }

  // --- aggregated setting ---

  LossInfo loss_and_grads(const Tensor& x, const std::vector<int>& labels, bool train, Rng& rng) {
    Tensor logits = forward_aggregated(x, train, rng);
    return backward_from_logits(logits, labels, x);
  }

  std::vector<double> predict(const Tensor& x) {
    Rng dummy(0);
    Tensor logits = forward_aggregated(x, false, dummy);
    return probs_from_logits(logits);
  }

  // --- series setting ---

  LossInfo loss_and_grads_series(const std::vector<Tensor>& seq, const std::vector<int>& labels,
                                 bool train, Rng& rng) {
    Tensor logits = forward_series(seq, train, rng);
    return backward_from_logits_series(logits, labels, seq);
  }

  // attention_out, when non-null, receives the B x T weight matrix.
  std::vector<double> predict_series(const std::vector<Tensor>& seq,
                                     Tensor* attention_out = nullptr) {
    Rng dummy(0);
    Tensor logits = forward_series(seq, false, dummy);
    if (attention_out) {
      if (!has_attention_) throw FbtError("model has no attention weights to export");
      *attention_out = attn_cache_.alpha;
    }
    return probs_from_logits(logits);
  }

 private:
  Tensor forward_aggregated(const Tensor& x, bool train, Rng& rng) {
    const Tensor* cur = &x;
    if (has_ae_) {
      ae_.forward(x);
      cur = &ae_.code;
    }
    fc1_.forward(*cur, h1_);
    relu_forward(h1_);
    drop1_.forward(h1_, train, rng);
    fc2_.forward(h1_, h2_);
    relu_forward(h2_);
    drop2_.forward(h2_, train, rng);
    Tensor logits;
    head_.forward(h2_, logits);
    if (!logits.all_finite()) throw FbtError("non-finite activations in forward pass");
    return logits;
  }

  LossInfo backward_from_logits(const Tensor& logits, const std::vector<int>& labels,
                                const Tensor& x) {
    LossInfo info;
    Tensor probs, dlogits;
    info.bce = softmax_bce(logits, labels, probs, dlogits);
    Tensor dh2;
    head_.backward(dlogits, dh2);
    drop2_.backward(dh2);
    relu_backward(dh2, h2_);
    Tensor dh1;
    fc2_.backward(dh2, dh1);
    drop1_.backward(dh1);
    relu_backward(dh1, h1_);
    Tensor dx;
    fc1_.backward(dh1, dx);
    if (has_ae_) {
      Tensor drecon;
      info.recon = mse_loss(ae_.recon, x, drecon, cfg_.lambda_recon);
      ae_.backward(dx, drecon);
    }
    info.total = info.bce + cfg_.lambda_recon * info.recon;
    return info;
  }

  Tensor forward_series(const std::vector<Tensor>& seq, bool train, Rng& rng) {
    const size_t steps = seq.size();
    const size_t batch = steps ? seq[0].rows() : 0;
    const std::vector<Tensor>* core_in = &seq;
    if (has_ae_) {
      // stack to (B*T) x F, encode once, split back per timestep
      Tensor stacked(batch * steps, input_dim_);
      for (size_t t = 0; t < steps; ++t)
        for (size_t r = 0; r < batch; ++r)
          std::copy(seq[t].row(r), seq[t].row(r) + input_dim_, stacked.row(t * batch + r));
      ae_input_ = std::move(stacked);
      ae_.forward(ae_input_);
      code_seq_.assign(steps, Tensor());
      const size_t code_dim = ae_.bottleneck;
      for (size_t t = 0; t < steps; ++t) {
        code_seq_[t] = Tensor(batch, code_dim);
        for (size_t r = 0; r < batch; ++r)
          std::copy(ae_.code.row(t * batch + r), ae_.code.row(t * batch + r) + code_dim,
                    code_seq_[t].row(r));
      }
      core_in = &code_seq_;
    }
    const size_t layers = cfg_.rnn_layers;
    lstm_caches_.assign(is_gru_ ? 0 : layers, LstmLayer::Cache());
    gru_caches_.assign(is_gru_ ? layers : 0, GruLayer::Cache());
    layer_inputs_.assign(layers, std::vector<Tensor>());
    dropout_masks_.assign(layers, std::vector<Tensor>());
    const std::vector<Tensor>* cur = core_in;
    for (size_t l = 0; l < layers; ++l) {
      layer_inputs_[l] = *cur;  // copy; needed for backward through dropout
      if (l > 0 && train && inter_dropout_.rate > 0.0) {
        const double keep = 1.0 - inter_dropout_.rate;
        dropout_masks_[l].assign(steps, Tensor());
        for (size_t t = 0; t < steps; ++t) {
          Tensor& m = dropout_masks_[l][t];
          m = Tensor(layer_inputs_[l][t].shape);
          for (size_t i = 0; i < m.data.size(); ++i) {
            m.data[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            layer_inputs_[l][t].data[i] *= m.data[i];
          }
        }
      }
      if (is_gru_)
        gru_[l].forward(layer_inputs_[l], gru_caches_[l]);
      else
        lstm_[l].forward(layer_inputs_[l], lstm_caches_[l]);
      cur = is_gru_ ? &gru_caches_[l].h : &lstm_caches_[l].h;
    }
    const std::vector<Tensor>& top = *cur;
    Tensor core_out;
    if (has_attention_) {
      attn_.forward(top, attn_cache_, core_out);
    } else {
      core_out = top.back();
    }
    Tensor logits;
    head_.forward(core_out, logits);
    if (!logits.all_finite()) throw FbtError("non-finite activations in forward pass");
    return logits;
  }

  LossInfo backward_from_logits_series(const Tensor& logits, const std::vector<int>& labels,
                                       const std::vector<Tensor>& seq) {
    LossInfo info;
    const size_t steps = seq.size();
    const size_t batch = steps ? seq[0].rows() : 0;
    Tensor probs, dlogits;
    info.bce = softmax_bce(logits, labels, probs, dlogits);
    Tensor dcore;
    head_.backward(dlogits, dcore);
    const size_t layers = cfg_.rnn_layers;
    std::vector<Tensor> dh_top(steps, Tensor(batch, cfg_.rnn_hidden));
    if (has_attention_) {
      attn_.backward(attn_cache_, dcore, dh_top);
    } else {
      dh_top[steps - 1] = dcore;
    }
    std::vector<Tensor> dh = std::move(dh_top);
    std::vector<Tensor> dx;
    for (size_t l = layers; l-- > 0;) {
      if (is_gru_)
        gru_[l].backward(gru_caches_[l], dh, dx);
      else
        lstm_[l].backward(lstm_caches_[l], dh, dx);
      if (l > 0 && !dropout_masks_[l].empty()) {
        for (size_t t = 0; t < steps; ++t)
          for (size_t i = 0; i < dx[t].data.size(); ++i)
            dx[t].data[i] *= dropout_masks_[l][t].data[i];
      }
      dh = std::move(dx);
    }
    if (has_ae_) {
      const size_t code_dim = ae_.bottleneck;
      Tensor dcode(batch * steps, code_dim);
      for (size_t t = 0; t < steps; ++t)
        for (size_t r = 0; r < batch; ++r)
          std::copy(dh[t].row(r), dh[t].row(r) + code_dim, dcode.row(t * batch + r));
      Tensor drecon;
      info.recon = mse_loss(ae_.recon, ae_input_, drecon, cfg_.lambda_recon);
      ae_.backward(dcode, drecon);
    }
    info.total = info.bce + cfg_.lambda_recon * info.recon;
    return info;
  }

  std::vector<double> probs_from_logits(const Tensor& logits) {
    Tensor probs;
    softmax2(logits, probs);
    std::vector<double> out(logits.rows());
    for (size_t i = 0; i < out.size(); ++i) out[i] = probs.at(i, 1);
    return out;
  }

  ExperimentConfig cfg_;
  size_t input_dim_ = 0;
  size_t core_input_dim_ = 0;
  bool has_ae_ = false;
  bool has_attention_ = false;
  bool is_gru_ = false;

  Autoencoder ae_;
  std::vector<LstmLayer> lstm_;
  std::vector<GruLayer> gru_;
  Attention attn_;
  Dense fc1_, fc2_, head_;
  Dropout drop1_, drop2_, inter_dropout_;

  // forward caches
  Tensor h1_, h2_;
  Tensor ae_input_;
  std::vector<Tensor> code_seq_;
  std::vector<LstmLayer::Cache> lstm_caches_;
  std::vector<GruLayer::Cache> gru_caches_;
  std::vector<std::vector<Tensor>> layer_inputs_;
  std::vector<std::vector<Tensor>> dropout_masks_;
  Attention::Cache attn_cache_;
};

}  // namespace fbt
