#pragma once

// Batched LSTM layer with backpropagation through time.
// Gate order in the stacked 4H dimension: input i, forget f, cell candidate
// g, output o. Initial hidden and cell states are zero; the forget-gate bias
// starts at 1.0.

#include <vector>

#include "fbt/nn/layers.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

struct LstmLayer {
  size_t input_dim = 0, hidden = 0;
  Tensor w;  // 4H x I
  Tensor u;  // 4H x H
  Tensor b;  // 4H
  Tensor gw, gu, gb;

  struct Cache {
    std::vector<Tensor> gates;  // per t: B x 4H, post-activation (i,f,g,o)
    std::vector<Tensor> c;      // per t: B x H
    std::vector<Tensor> h;      // per t: B x H
    const std::vector<Tensor>* inputs = nullptr;
  };

  void init(size_t in_dim, size_t hidden_dim, Rng& rng) {
    input_dim = in_dim;
    hidden = hidden_dim;
    w = Tensor(4 * hidden, input_dim);
    u = Tensor(4 * hidden, hidden);
    b = Tensor({4 * hidden});
    init_uniform(w, input_dim, rng);
    init_uniform(u, hidden, rng);
    init_uniform(b, hidden, rng);
    for (size_t j = hidden; j < 2 * hidden; ++j) b.data[j] = 1.0;  // forget gate
    gw = Tensor(4 * hidden, input_dim);
    gu = Tensor(4 * hidden, hidden);
    gb = Tensor({4 * hidden});
  }

  void forward(const std::vector<Tensor>& x_seq, Cache& cache) const {
    const size_t steps = x_seq.size();
    const size_t batch = x_seq.empty() ? 0 : x_seq[0].rows();
    cache.gates.assign(steps, Tensor());
    cache.c.assign(steps, Tensor());
    cache.h.assign(steps, Tensor());
    cache.inputs = &x_seq;
    Tensor h_prev(batch, hidden), c_prev(batch, hidden);
    for (size_t t = 0; t < steps; ++t) {
      Tensor& a = cache.gates[t];
      matmul_nt(x_seq[t], w, a);
      matmul_nt_acc(h_prev, u, a);
      add_row_bias(a, b);
      Tensor& ct = cache.c[t];
      Tensor& ht = cache.h[t];
      ct = Tensor(batch, hidden);
      ht = Tensor(batch, hidden);
      for (size_t r = 0; r < batch; ++r) {
        double* ar = a.row(r);
        const double* cp = c_prev.row(r);
        double* cr = ct.row(r);
        double* hr = ht.row(r);
        for (size_t j = 0; j < hidden; ++j) {
          const double gi = sigmoid(ar[j]);
          const double gf = sigmoid(ar[hidden + j]);
          const double gg = std::tanh(ar[2 * hidden + j]);
          const double go = sigmoid(ar[3 * hidden + j]);
          ar[j] = gi;
          ar[hidden + j] = gf;
          ar[2 * hidden + j] = gg;
          ar[3 * hidden + j] = go;
          cr[j] = gf * cp[j] + gi * gg;
          hr[j] = go * std::tanh(cr[j]);
        }
      }
      h_prev = ht;
      c_prev = ct;
    }
  }

  // dh_seq holds the gradient flowing into each h_t from above; dx_seq is
  // overwritten with the gradient wrt this layer's inputs.
  void backward(const Cache& cache, const std::vector<Tensor>& dh_seq,
                std::vector<Tensor>& dx_seq) {
    const size_t steps = cache.h.size();
    const size_t batch = steps ? cache.h[0].rows() : 0;
    dx_seq.assign(steps, Tensor());
    Tensor dh_carry(batch, hidden), dc_carry(batch, hidden);
    Tensor da(batch, 4 * hidden);
    for (size_t ti = steps; ti-- > 0;) {
      const Tensor& gates = cache.gates[ti];
      const Tensor& ct = cache.c[ti];
      const Tensor* c_prev = ti > 0 ? &cache.c[ti - 1] : nullptr;
      for (size_t r = 0; r < batch; ++r) {
        const double* gr = gates.row(r);
        const double* cr = ct.row(r);
        const double* cpr = c_prev ? c_prev->row(r) : nullptr;
        const double* dh_in = dh_seq[ti].row(r);
        double* dhc = dh_carry.row(r);
        double* dcc = dc_carry.row(r);
        double* dar = da.row(r);
        for (size_t j = 0; j < hidden; ++j) {
          const double gi = gr[j], gf = gr[hidden + j], gg = gr[2 * hidden + j],
                       go = gr[3 * hidden + j];
          const double tc = std::tanh(cr[j]);
          const double dh = dh_in[j] + dhc[j];
          const double d_o = dh * tc;
          double dc = dcc[j] + dh * go * (1.0 - tc * tc);
          const double d_i = dc * gg;
          const double d_g = dc * gi;
          const double d_f = cpr ? dc * cpr[j] : 0.0;
          dcc[j] = dc * gf;
          dar[j] = d_i * gi * (1.0 - gi);
          dar[hidden + j] = d_f * gf * (1.0 - gf);
          dar[2 * hidden + j] = d_g * (1.0 - gg * gg);
          dar[3 * hidden + j] = d_o * go * (1.0 - go);
        }
      }
      matmul_tn_acc(da, (*cache.inputs)[ti], gw);
      sum_rows_acc(da, gb);
      matmul_nn(da, w, dx_seq[ti]);
      if (ti > 0) {
        matmul_tn_acc(da, cache.h[ti - 1], gu);
        matmul_nn(da, u, dh_carry);
      }
    }
  }

  void zero_grads() {
    gw.zero();
    gu.zero();
    gb.zero();
  }
};

}  // namespace fbt
