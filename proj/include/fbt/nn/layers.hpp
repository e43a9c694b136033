#pragma once

// Dense layer, activations, dropout, and the 2-logit softmax head with
// binary cross-entropy. Everything is 64-bit and reverse-mode: each forward
// caches what its backward needs, and backward accumulates into .g* tensors.

#include <cmath>
#include <vector>

#include "fbt/common.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

// Uniform(-k, k) with k = 1/sqrt(fan_in).
inline void init_uniform(Tensor& t, size_t fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-k, k);
}

struct Dense {
  Tensor w;  // out x in
  Tensor b;  // out
  Tensor gw, gb;
  Tensor input;  // cached batch input

  void init(size_t in_dim, size_t out_dim, Rng& rng) {
    w = Tensor(out_dim, in_dim);
    b = Tensor({out_dim});
    init_uniform(w, in_dim, rng);
    init_uniform(b, in_dim, rng);
    gw = Tensor(out_dim, in_dim);
    gb = Tensor({out_dim});
  }

  void forward(const Tensor& x, Tensor& y) {
    input = x;
    matmul_nt(x, w, y);
    add_row_bias(y, b);
  }

  // Inference-only path, no cache.
  void forward_inference(const Tensor& x, Tensor& y) const {
    matmul_nt(x, w, y);
    add_row_bias(y, b);
  }

  void backward(const Tensor& dy, Tensor& dx) {
    matmul_tn_acc(dy, input, gw);
    sum_rows_acc(dy, gb);
    matmul_nn(dy, w, dx);
  }

  void zero_grads() {
    gw.zero();
    gb.zero();
  }
};

inline void relu_forward(Tensor& x) {
  for (double& v : x.data)
    if (v < 0.0) v = 0.0;
}

// Backward using the cached post-activation (zero iff pre-activation <= 0).
inline void relu_backward(Tensor& d, const Tensor& post) {
  for (size_t i = 0; i < d.data.size(); ++i)
    if (post.data[i] <= 0.0) d.data[i] = 0.0;
}

// Inverted dropout: scales kept units by 1/keep at train time so inference
// is the identity.
struct Dropout {
  double rate = 0.0;
  Tensor mask;

  void forward(Tensor& x, bool train, Rng& rng) {
    if (!train || rate <= 0.0) return;
    const double keep = 1.0 - rate;
    mask = Tensor(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
      mask.data[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      x.data[i] *= mask.data[i];
    }
  }

  void backward(Tensor& d) const {
    if (mask.data.empty()) return;
    for (size_t i = 0; i < d.data.size(); ++i) d.data[i] *= mask.data[i];
  }
};

// ---------------------------------------------------------------------------
// Softmax head over 2 logits + binary cross-entropy.
// Logits are clamped to [-30, 30] before the softmax/log; the clamp's
// gradient is zero outside the interval.
// ---------------------------------------------------------------------------

constexpr double kLogitClamp = 30.0;

// probs: B x 2. Returns row-wise softmax of clamped logits.
inline void softmax2(const Tensor& logits, Tensor& probs) {
  probs.shape = {logits.rows(), 2};
  probs.data.resize(logits.rows() * 2);
  for (size_t i = 0; i < logits.rows(); ++i) {
    const double z0 = std::clamp(logits.at(i, 0), -kLogitClamp, kLogitClamp);
    const double z1 = std::clamp(logits.at(i, 1), -kLogitClamp, kLogitClamp);
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    probs.at(i, 0) = e0 / (e0 + e1);
    probs.at(i, 1) = e1 / (e0 + e1);
  }
}

// Mean BCE over the batch; fills dlogits with d(loss)/d(logits).
inline double softmax_bce(const Tensor& logits, const std::vector<int>& labels, Tensor& probs,
                          Tensor& dlogits) {
  const size_t n = logits.rows();
  softmax2(logits, probs);
  dlogits.shape = {n, 2};
  dlogits.data.assign(n * 2, 0.0);
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    loss -= std::log(probs.at(i, y));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < 2; ++c) {
      double g = (probs.at(i, c) - (c == y ? 1.0 : 0.0)) * inv_n;
      if (std::abs(logits.at(i, c)) > kLogitClamp) g = 0.0;  // clamp cuts the gradient
      dlogits.at(i, c) = g;
    }
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw FbtError("non-finite binary cross-entropy loss");
  return loss;
}

// Mean squared error over all cells; accumulates scale * d(mse)/d(pred).
inline double mse_loss(const Tensor& pred, const Tensor& target, Tensor& dpred, double scale) {
  const size_t n = pred.data.size();
  if (n != target.data.size()) throw FbtError("mse shape mismatch");
  dpred.shape = pred.shape;
  dpred.data.resize(n);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double diff = pred.data[i] - target.data[i];
    loss += diff * diff;
    dpred.data[i] = scale * 2.0 * diff * inv_n;
  }
  return loss * inv_n;
}

// Column-block helpers used by the gated recurrent layers.
inline Tensor take_cols(const Tensor& a, size_t c0, size_t c1) {
  Tensor out(a.rows(), c1 - c0);
  for (size_t i = 0; i < a.rows(); ++i)
    std::copy(a.row(i) + c0, a.row(i) + c1, out.row(i));
  return out;
}

inline void put_cols(Tensor& dst, size_t c0, const Tensor& src) {
  for (size_t i = 0; i < src.rows(); ++i)
    std::copy(src.row(i), src.row(i) + src.cols(), dst.row(i) + c0);
}

}  // namespace fbt
