#pragma once

// RMSprop and Adam over a named parameter registry. Per the training recipe,
// classifier parameters step with RMSprop and autoencoder parameters with
// Adam; the two optimizers own disjoint groups.

#include <cmath>
#include <string>
#include <vector>

#include "fbt/tensor.hpp"

namespace fbt {

enum class ParamGroup { classifier = 0, autoencoder = 1 };

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  ParamGroup group = ParamGroup::classifier;
};

struct OptimizerConfig {
  double lr = 1e-3;
  double rmsprop_rho = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double eps = 1e-8;
};

class RmsProp {
 public:
  RmsProp(double lr, double rho, double eps) : lr_(lr), rho_(rho), eps_(eps) {}

  void step(const std::vector<ParamRef>& params) {
    if (sq_.size() != params.size()) {
      sq_.clear();
      for (const auto& p : params) sq_.emplace_back(p.value->shape);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& s = sq_[i];
      const Tensor& g = *params[i].grad;
      Tensor& v = *params[i].value;
      for (size_t j = 0; j < v.data.size(); ++j) {
        s.data[j] = rho_ * s.data[j] + (1.0 - rho_) * g.data[j] * g.data[j];
        v.data[j] -= lr_ * g.data[j] / (std::sqrt(s.data[j]) + eps_);
      }
    }
  }

 private:
  double lr_, rho_, eps_;
  std::vector<Tensor> sq_;
};

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamRef>& params) {
    if (m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (const auto& p : params) {
        m_.emplace_back(p.value->shape);
        v_.emplace_back(p.value->shape);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      const Tensor& g = *params[i].grad;
      Tensor& p = *params[i].value;
      for (size_t j = 0; j < p.data.size(); ++j) {
        m.data[j] = beta1_ * m.data[j] + (1.0 - beta1_) * g.data[j];
        v.data[j] = beta2_ * v.data[j] + (1.0 - beta2_) * g.data[j] * g.data[j];
        const double mhat = m.data[j] / bc1;
        const double vhat = v.data[j] / bc2;
        p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace fbt
