#pragma once

// Stacked autoencoder: dense encoder to a bottleneck code, symmetric dense
// decoder back to the input dimension. ReLU between layers, linear at the
// encoder output and decoder output. The code feeds the classifier; the
// reconstruction MSE joins the training objective.

#include <string>
#include <vector>

#include "fbt/nn/layers.hpp"
#include "fbt/nn/optimizer.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

struct Autoencoder {
  std::vector<Dense> enc;
  std::vector<Dense> dec;
  size_t input_dim = 0, bottleneck = 0;

  // caches for one joint forward
  std::vector<Tensor> enc_acts;  // post-activation outputs per encoder layer
  std::vector<Tensor> dec_acts;
  Tensor code, recon;

  void init(size_t in_dim, const std::vector<size_t>& hidden, size_t code_dim, Rng& rng) {
    input_dim = in_dim;
    bottleneck = code_dim;
    std::vector<size_t> dims;
    dims.push_back(in_dim);
    for (size_t h : hidden) dims.push_back(h);
    dims.push_back(code_dim);
    enc.resize(dims.size() - 1);
    for (size_t i = 0; i + 1 < dims.size(); ++i) enc[i].init(dims[i], dims[i + 1], rng);
    dec.resize(dims.size() - 1);
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
      const size_t j = dims.size() - 1 - i;
      dec[i].init(dims[j], dims[j - 1], rng);
    }
  }

  // x: rows x input_dim. Produces code (rows x bottleneck) and recon.
  void forward(const Tensor& x) {
    enc_acts.assign(enc.size(), Tensor());
    const Tensor* cur = &x;
    for (size_t i = 0; i < enc.size(); ++i) {
      enc[i].forward(*cur, enc_acts[i]);
      if (i + 1 < enc.size()) relu_forward(enc_acts[i]);
      cur = &enc_acts[i];
    }
    code = enc_acts.back();
    dec_acts.assign(dec.size(), Tensor());
    cur = &code;
    for (size_t i = 0; i < dec.size(); ++i) {
      dec[i].forward(*cur, dec_acts[i]);
      if (i + 1 < dec.size()) relu_forward(dec_acts[i]);
      cur = &dec_acts[i];
    }
    recon = dec_acts.back();
  }

  void encode_inference(const Tensor& x, Tensor& out) const {
    Tensor tmp;
    const Tensor* cur = &x;
    for (size_t i = 0; i < enc.size(); ++i) {
      enc[i].forward_inference(*cur, tmp);
      if (i + 1 < enc.size()) relu_forward(tmp);
      out = tmp;
      cur = &out;
    }
  }

  // dcode: gradient reaching the code from the classifier path;
  // drecon: gradient of the reconstruction loss wrt recon.
  void backward(const Tensor& dcode, const Tensor& drecon) {
    Tensor d = drecon;
    Tensor dprev;
    for (size_t i = dec.size(); i-- > 0;) {
      if (i + 1 < dec.size()) relu_backward(d, dec_acts[i]);
      dec[i].backward(d, dprev);
      d = dprev;
    }
    // d now holds the decoder's gradient wrt the code
    for (size_t i = 0; i < d.data.size(); ++i) d.data[i] += dcode.data[i];
    for (size_t i = enc.size(); i-- > 0;) {
      if (i + 1 < enc.size()) relu_backward(d, enc_acts[i]);
      enc[i].backward(d, dprev);
      d = dprev;
    }
  }

  void zero_grads() {
    for (auto& l : enc) l.zero_grads();
    for (auto& l : dec) l.zero_grads();
  }
};

inline std::vector<ParamRef> autoencoder_params(Autoencoder& ae) {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < ae.enc.size(); ++i) {
    out.push_back({"ae.enc" + std::to_string(i) + ".w", &ae.enc[i].w, &ae.enc[i].gw,
                   ParamGroup::autoencoder});
    out.push_back({"ae.enc" + std::to_string(i) + ".b", &ae.enc[i].b, &ae.enc[i].gb,
                   ParamGroup::autoencoder});
  }
  for (size_t i = 0; i < ae.dec.size(); ++i) {
    out.push_back({"ae.dec" + std::to_string(i) + ".w", &ae.dec[i].w, &ae.dec[i].gw,
                   ParamGroup::autoencoder});
    out.push_back({"ae.dec" + std::to_string(i) + ".b", &ae.dec[i].b, &ae.dec[i].gb,
                   ParamGroup::autoencoder});
  }
  return out;
}

}  // namespace fbt
