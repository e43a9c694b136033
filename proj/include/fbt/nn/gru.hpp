#pragma once

// Batched GRU layer with backpropagation through time.
// h_t = z * h_{t-1} + (1 - z) * candidate, candidate = tanh(Wc x + Uc (r*h) + bc).
// Input weights for all three gates are stacked as a 3H x I block (z, r, c);
// recurrent weights split into u_zr (2H x H, applied to h_{t-1}) and u_c
// (H x H, applied to r * h_{t-1}).

#include <vector>

#include "fbt/nn/layers.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

struct GruLayer {
  size_t input_dim = 0, hidden = 0;
  Tensor w;     // 3H x I
  Tensor u_zr;  // 2H x H
  Tensor u_c;   // H x H
  Tensor b;     // 3H
  Tensor gw, gu_zr, gu_c, gb;

  struct Cache {
    std::vector<Tensor> zr;  // per t: B x 2H post-sigmoid (z, r)
    std::vector<Tensor> hc;  // per t: B x H candidate (tanh)
    std::vector<Tensor> rh;  // per t: B x H, r * h_prev
    std::vector<Tensor> h;   // per t: B x H
    const std::vector<Tensor>* inputs = nullptr;
  };

  void init(size_t in_dim, size_t hidden_dim, Rng& rng) {
    input_dim = in_dim;
    hidden = hidden_dim;
    w = Tensor(3 * hidden, input_dim);
    u_zr = Tensor(2 * hidden, hidden);
    u_c = Tensor(hidden, hidden);
    b = Tensor({3 * hidden});
    init_uniform(w, input_dim, rng);
    init_uniform(u_zr, hidden, rng);
    init_uniform(u_c, hidden, rng);
    init_uniform(b, hidden, rng);
    gw = Tensor(3 * hidden, input_dim);
    gu_zr = Tensor(2 * hidden, hidden);
    gu_c = Tensor(hidden, hidden);
    gb = Tensor({3 * hidden});
  }

  void forward(const std::vector<Tensor>& x_seq, Cache& cache) const {
    const size_t steps = x_seq.size();
    const size_t batch = x_seq.empty() ? 0 : x_seq[0].rows();
    cache.zr.assign(steps, Tensor());
    cache.hc.assign(steps, Tensor());
    cache.rh.assign(steps, Tensor());
    cache.h.assign(steps, Tensor());
    cache.inputs = &x_seq;
    Tensor h_prev(batch, hidden);
    for (size_t t = 0; t < steps; ++t) {
      Tensor a;  // B x 3H
      matmul_nt(x_seq[t], w, a);
      add_row_bias(a, b);
      Tensor a_zr_rec;
      matmul_nt(h_prev, u_zr, a_zr_rec);  // B x 2H
      Tensor& zr = cache.zr[t];
      zr = Tensor(batch, 2 * hidden);
      Tensor& rh = cache.rh[t];
      rh = Tensor(batch, hidden);
      for (size_t r = 0; r < batch; ++r) {
        const double* ar = a.row(r);
        const double* arec = a_zr_rec.row(r);
        const double* hp = h_prev.row(r);
        double* zrr = zr.row(r);
        double* rhr = rh.row(r);
        for (size_t j = 0; j < 2 * hidden; ++j) zrr[j] = sigmoid(ar[j] + arec[j]);
        for (size_t j = 0; j < hidden; ++j) rhr[j] = zrr[hidden + j] * hp[j];
      }
      Tensor a_c_rec;
      matmul_nt(rh, u_c, a_c_rec);  // B x H
      Tensor& hc = cache.hc[t];
      hc = Tensor(batch, hidden);
      Tensor& ht = cache.h[t];
      ht = Tensor(batch, hidden);
      for (size_t r = 0; r < batch; ++r) {
        const double* ar = a.row(r);
        const double* acr = a_c_rec.row(r);
        const double* hp = h_prev.row(r);
        const double* zrr = zr.row(r);
        double* hcr = hc.row(r);
        double* hr = ht.row(r);
        for (size_t j = 0; j < hidden; ++j) {
          hcr[j] = std::tanh(ar[2 * hidden + j] + acr[j]);
          hr[j] = zrr[j] * hp[j] + (1.0 - zrr[j]) * hcr[j];
        }
      }
      h_prev = ht;
    }
  }

  void backward(const Cache& cache, const std::vector<Tensor>& dh_seq,
                std::vector<Tensor>& dx_seq) {
    const size_t steps = cache.h.size();
    const size_t batch = steps ? cache.h[0].rows() : 0;
    dx_seq.assign(steps, Tensor());
    Tensor dh_carry(batch, hidden);
    Tensor da(batch, 3 * hidden);      // gate pre-activation grads (z, r, c)
    Tensor drh(batch, hidden);
    Tensor dh_prev(batch, hidden);
    for (size_t ti = steps; ti-- > 0;) {
      const Tensor& zr = cache.zr[ti];
      const Tensor& hc = cache.hc[ti];
      const Tensor zero(batch, hidden);
      const Tensor& h_prev = ti > 0 ? cache.h[ti - 1] : zero;
      // dh -> gate grads
      for (size_t r = 0; r < batch; ++r) {
        const double* zrr = zr.row(r);
        const double* hcr = hc.row(r);
        const double* hpr = h_prev.row(r);
        const double* dh_in = dh_seq[ti].row(r);
        const double* dhc_carry = dh_carry.row(r);
        double* dar = da.row(r);
        double* dhp = dh_prev.row(r);
        for (size_t j = 0; j < hidden; ++j) {
          const double z = zrr[j];
          const double dh = dh_in[j] + dhc_carry[j];
          const double dz = dh * (hpr[j] - hcr[j]);
          const double dcand = dh * (1.0 - z);
          dhp[j] = dh * z;
          dar[2 * hidden + j] = dcand * (1.0 - hcr[j] * hcr[j]);
          dar[j] = dz * z * (1.0 - z);
        }
      }
      // candidate path: u_c sees rh
      {
        Tensor da_c = take_cols(da, 2 * hidden, 3 * hidden);
        matmul_tn_acc(da_c, cache.rh[ti], gu_c);
        matmul_nn(da_c, u_c, drh);
        for (size_t r = 0; r < batch; ++r) {
          const double* zrr = zr.row(r);
          const double* hpr = h_prev.row(r);
          const double* drhr = drh.row(r);
          double* dar = da.row(r);
          double* dhp = dh_prev.row(r);
          for (size_t j = 0; j < hidden; ++j) {
            const double rgate = zrr[hidden + j];
            const double dr = drhr[j] * hpr[j];
            dhp[j] += drhr[j] * rgate;
            dar[hidden + j] = dr * rgate * (1.0 - rgate);
          }
        }
      }
      matmul_tn_acc(da, (*cache.inputs)[ti], gw);
      sum_rows_acc(da, gb);
      matmul_nn(da, w, dx_seq[ti]);
      {
        Tensor da_zr = take_cols(da, 0, 2 * hidden);
        matmul_tn_acc(da_zr, h_prev, gu_zr);
        Tensor dh_from_zr;
        matmul_nn(da_zr, u_zr, dh_from_zr);
        for (size_t i = 0; i < dh_prev.data.size(); ++i)
          dh_carry.data[i] = dh_prev.data[i] + dh_from_zr.data[i];
      }
      dh_prev.zero();
    }
  }

  void zero_grads() {
    gw.zero();
    gu_zr.zero();
    gu_c.zero();
    gb.zero();
  }
};

}  // namespace fbt
