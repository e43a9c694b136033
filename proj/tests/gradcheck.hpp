#pragma once

// Finite-difference gradient checking harness. Independent of the library's
// backward passes: it snapshots the analytic gradients, then re-evaluates the
// loss through a forward-only closure under central-difference perturbations.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fbt/nn/optimizer.hpp"

namespace gradcheck {

struct Result {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
  return std::abs(analytic - numeric) / denom;
}

// Call AFTER the analytic backward pass has filled the .grad tensors; the
// snapshot taken here is what gets compared. loss_fn may freely recompute
// gradients internally.
inline Result check_params(const std::vector<fbt::ParamRef>& params,
                           const std::function<double()>& loss_fn, double eps = 1e-5) {
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad->data);

  Result r;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const auto& p = params[pi];
    for (size_t j = 0; j < p.value->data.size(); ++j) {
      const double orig = p.value->data[j];
      p.value->data[j] = orig + eps;
      const double lp = loss_fn();
      p.value->data[j] = orig - eps;
      const double lm = loss_fn();
      p.value->data[j] = orig;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double e = rel_err(analytic[pi][j], numeric);
      ++r.checked;
      if (e > r.max_rel_err) {
        r.max_rel_err = e;
        r.worst_param = p.name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return r;
}

}  // namespace gradcheck
