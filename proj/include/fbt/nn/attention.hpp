#pragma once

// Additive attention over the top-layer hidden sequence:
//   score e_t = v_a . tanh(W_a h_t), weights = softmax_t(e), context = sum
// Weights are exported for interpretability.

#include <vector>

#include "fbt/nn/layers.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

struct Attention {
  size_t hidden = 0, attn_dim = 0;
  Tensor wa;  // A x H
  Tensor va;  // A
  Tensor gwa, gva;

  struct Cache {
    std::vector<Tensor> u;  // per t: B x A, tanh projections
    Tensor alpha;           // B x T
    const std::vector<Tensor>* h = nullptr;
  };

  void init(size_t hidden_dim, size_t attn, Rng& rng) {
    hidden = hidden_dim;
    attn_dim = attn;
    wa = Tensor(attn_dim, hidden);
    va = Tensor({attn_dim});
    init_uniform(wa, hidden, rng);
    init_uniform(va, attn_dim, rng);
    gwa = Tensor(attn_dim, hidden);
    gva = Tensor({attn_dim});
  }

  void forward(const std::vector<Tensor>& h_seq, Cache& cache, Tensor& context) const {
    const size_t steps = h_seq.size();
    const size_t batch = steps ? h_seq[0].rows() : 0;
    cache.u.assign(steps, Tensor());
    cache.h = &h_seq;
    Tensor scores(batch, steps);
    for (size_t t = 0; t < steps; ++t) {
      matmul_nt(h_seq[t], wa, cache.u[t]);
      Tensor& ut = cache.u[t];
      for (double& v : ut.data) v = std::tanh(v);
      for (size_t r = 0; r < batch; ++r)
        scores.at(r, t) = dot(ut.row(r), va.data.data(), attn_dim);
    }
    cache.alpha = Tensor(batch, steps);
    for (size_t r = 0; r < batch; ++r) {
      const double* sr = scores.row(r);
      double* ar = cache.alpha.row(r);
      double m = sr[0];
      for (size_t t = 1; t < steps; ++t) m = std::max(m, sr[t]);
      double sum = 0.0;
      for (size_t t = 0; t < steps; ++t) {
        ar[t] = std::exp(sr[t] - m);
        sum += ar[t];
      }
      for (size_t t = 0; t < steps; ++t) ar[t] /= sum;
    }
    context = Tensor(batch, hidden);
    for (size_t t = 0; t < steps; ++t) {
      for (size_t r = 0; r < batch; ++r)
        axpy(cache.alpha.at(r, t), h_seq[t].row(r), context.row(r), hidden);
    }
  }

  // Accumulates into dh_seq (which must be sized T of B x H).
  void backward(const Cache& cache, const Tensor& dcontext, std::vector<Tensor>& dh_seq) {
    const size_t steps = cache.u.size();
    const size_t batch = dcontext.rows();
    const auto& h_seq = *cache.h;
    Tensor dalpha(batch, steps);
    for (size_t t = 0; t < steps; ++t) {
      for (size_t r = 0; r < batch; ++r) {
        dalpha.at(r, t) = dot(dcontext.row(r), h_seq[t].row(r), hidden);
        axpy(cache.alpha.at(r, t), dcontext.row(r), dh_seq[t].row(r), hidden);
      }
    }
    // softmax backward
    Tensor de(batch, steps);
    for (size_t r = 0; r < batch; ++r) {
      const double* ar = cache.alpha.row(r);
      const double* dar = dalpha.row(r);
      double inner = 0.0;
      for (size_t t = 0; t < steps; ++t) inner += ar[t] * dar[t];
      for (size_t t = 0; t < steps; ++t) de.at(r, t) = ar[t] * (dar[t] - inner);
    }
    Tensor du(batch, attn_dim);
    for (size_t t = 0; t < steps; ++t) {
      const Tensor& ut = cache.u[t];
      for (size_t r = 0; r < batch; ++r) {
        const double det = de.at(r, t);
        const double* ur = ut.row(r);
        double* dur = du.row(r);
        for (size_t j = 0; j < attn_dim; ++j) {
          gva.data[j] += det * ur[j];
          dur[j] = det * va.data[j] * (1.0 - ur[j] * ur[j]);
        }
      }
      matmul_tn_acc(du, h_seq[t], gwa);
      matmul_nn_acc(du, wa, dh_seq[t]);
    }
  }

  void zero_grads() {
    gwa.zero();
    gva.zero();
  }
};

}  // namespace fbt
