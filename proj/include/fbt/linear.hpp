#pragma once

// Regularized logistic regression on time-aggregated features.
//   objective(w, b) = mean log-loss + lambda * penalty(w), intercept unpenalized
//   penalty: l1 -> ||w||_1 (proximal gradient / soft-thresholding)
//            l2 -> ||w||_2^2 (gradient descent with backtracking line search)
// Both solvers are deterministic from zero init. The L1 solver is monotone in
// the objective and additionally iterates until the KKT residual is below
// 5 * tol so downstream optimality checks hold.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fbt/common.hpp"
#include "fbt/tensor.hpp"

namespace fbt {

enum class Penalty { l1, l2 };

inline const char* penalty_name(Penalty p) { return p == Penalty::l1 ? "l1" : "l2"; }

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  Penalty penalty = Penalty::l2;
  double lambda = 0.0;
  size_t iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
};

namespace linear_detail {

// Stable log(1 + exp(-m)).
inline double log1p_exp_neg(double m) {
  if (m > 0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

// Mean log-loss and its gradient wrt (w, b). Labels are 0/1.
inline double logloss_grad(const Tensor& x, const std::vector<int>& y,
                           const std::vector<double>& w, double b, std::vector<double>& gw,
                           double& gb) {
  const size_t n = x.rows(), d = x.cols();
  gw.assign(d, 0.0);
  gb = 0.0;
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double sgn = y[i] ? 1.0 : -1.0;
    const double m = sgn * (dot(x.row(i), w.data(), d) + b);
    loss += log1p_exp_neg(m);
    const double coef = -sgn * sigmoid(-m);
    axpy(coef, x.row(i), gw.data(), d);
    gb += coef;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  for (double& g : gw) g *= inv_n;
  gb *= inv_n;
  return loss;
}

inline double logloss_only(const Tensor& x, const std::vector<int>& y,
                           const std::vector<double>& w, double b) {
  const size_t n = x.rows(), d = x.cols();
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double sgn = y[i] ? 1.0 : -1.0;
    loss += log1p_exp_neg(sgn * (dot(x.row(i), w.data(), d) + b));
  }
  return loss / static_cast<double>(n);
}

inline double l1_norm(const std::vector<double>& w) {
  double s = 0;
  for (double v : w) s += std::abs(v);
  return s;
}

inline double l2_sq(const std::vector<double>& w) {
  double s = 0;
  for (double v : w) s += v * v;
  return s;
}

}  // namespace linear_detail

inline double linear_objective(const Tensor& x, const std::vector<int>& y,
                               const LinearModel& model) {
  double obj = linear_detail::logloss_only(x, y, model.weights, model.intercept);
  if (model.penalty == Penalty::l1)
    obj += model.lambda * linear_detail::l1_norm(model.weights);
  else
    obj += model.lambda * linear_detail::l2_sq(model.weights);
  return obj;
}

inline LinearModel fit_logistic(const Tensor& x, const std::vector<int>& y, Penalty penalty,
                                double lambda, double tol = 1e-8, size_t max_iter = 200000) {
  const size_t n = x.rows(), d = x.cols();
  if (n < 2) throw FbtError("fit_logistic needs at least 2 rows");
  {
    bool has0 = false, has1 = false;
    for (int v : y) (v ? has1 : has0) = true;
    if (!has0 || !has1) throw FbtError("fit_logistic requires both classes present");
  }
  LinearModel model;
  model.penalty = penalty;
  model.lambda = lambda;
  model.weights.assign(d, 0.0);
  model.intercept = 0.0;

  std::vector<double> gw;
  double gb;
  if (penalty == Penalty::l2) {
    // gradient descent with backtracking line search on the full objective
    double step = 1.0;
    for (size_t it = 0; it < max_iter; ++it) {
      const double loss =
          linear_detail::logloss_grad(x, y, model.weights, model.intercept, gw, gb);
      double gmax = std::abs(gb + 0.0);
      for (size_t j = 0; j < d; ++j) {
        gw[j] += 2.0 * lambda * model.weights[j];
        gmax = std::max(gmax, std::abs(gw[j]));
      }
      gmax = std::max(gmax, std::abs(gb));
      model.iterations = it + 1;
      if (gmax < tol) {
        model.converged = true;
        break;
      }
      const double obj = loss + lambda * linear_detail::l2_sq(model.weights);
      double gnorm2 = gb * gb;
      for (double g : gw) gnorm2 += g * g;
      std::vector<double> wtry(d);
      double btry;
      double t = step;
      for (int bt = 0; bt < 60; ++bt) {
        for (size_t j = 0; j < d; ++j) wtry[j] = model.weights[j] - t * gw[j];
        btry = model.intercept - t * gb;
        const double obj_try = linear_detail::logloss_only(x, y, wtry, btry) +
                               lambda * linear_detail::l2_sq(wtry);
        if (obj_try <= obj - 1e-4 * t * gnorm2) break;
        t *= 0.5;
      }
      model.weights = wtry;
      model.intercept = btry;
      step = std::min(t * 2.0, 1e6);
    }
  } else {
    // monotone proximal gradient (ISTA) with backtracking
    double step = 1.0;
    double prev_obj =
        linear_detail::logloss_only(x, y, model.weights, model.intercept);
    bool obj_converged = false;
    for (size_t it = 0; it < max_iter; ++it) {
      const double loss =
          linear_detail::logloss_grad(x, y, model.weights, model.intercept, gw, gb);
      (void)loss;
      std::vector<double> wtry(d);
      double btry;
      double t = step;
      double obj_try = 0.0;
      for (int bt = 0; bt < 60; ++bt) {
        for (size_t j = 0; j < d; ++j) {
          const double z = model.weights[j] - t * gw[j];
          const double thr = t * lambda;
          wtry[j] = z > thr ? z - thr : (z < -thr ? z + thr : 0.0);
        }
        btry = model.intercept - t * gb;  // intercept unpenalized
        obj_try = linear_detail::logloss_only(x, y, wtry, btry) +
                  lambda * linear_detail::l1_norm(wtry);
        // sufficient decrease wrt the quadratic model around (w, b)
        double quad = loss + lambda * linear_detail::l1_norm(wtry);
        for (size_t j = 0; j < d; ++j) {
          const double diff = wtry[j] - model.weights[j];
          quad += gw[j] * diff + diff * diff / (2.0 * t);
        }
        const double bdiff = btry - model.intercept;
        quad += gb * bdiff + bdiff * bdiff / (2.0 * t);
        if (obj_try <= quad + 1e-12) break;
        t *= 0.5;
      }
      model.weights = wtry;
      model.intercept = btry;
      step = std::min(t * 1.5, 1e6);
      model.iterations = it + 1;
      if (std::abs(prev_obj - obj_try) < tol) obj_converged = true;
      prev_obj = obj_try;
      if (obj_converged) {
        // continue until the KKT residual is tight enough for optimality checks
        linear_detail::logloss_grad(x, y, model.weights, model.intercept, gw, gb);
        double res = std::abs(gb);
        for (size_t j = 0; j < d; ++j) {
          if (model.weights[j] != 0.0)
            res = std::max(res, std::abs(gw[j] + lambda * (model.weights[j] > 0 ? 1.0 : -1.0)));
          else
            res = std::max(res, std::max(std::abs(gw[j]) - lambda, 0.0));
        }
        if (res < 5.0 * tol) {
          model.converged = true;
          break;
        }
      }
    }
  }
  model.final_objective = linear_objective(x, y, model);
  return model;
}

inline double predict_proba(const LinearModel& model, const double* x) {
  return sigmoid(dot(x, model.weights.data(), model.weights.size()) + model.intercept);
}

inline std::vector<double> predict_proba(const LinearModel& model, const Tensor& x) {
  std::vector<double> out(x.rows());
  for (size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(model, x.row(i));
  return out;
}

// Features ranked by |coefficient| descending; ties keep schema order.
inline std::vector<std::pair<std::string, double>> top_coefficients(
    const LinearModel& model, const std::vector<std::string>& columns, size_t k = 5) {
  std::vector<size_t> idx(model.weights.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return std::abs(model.weights[a]) > std::abs(model.weights[b]);
  });
  std::vector<std::pair<std::string, double>> out;
  for (size_t i = 0; i < std::min(k, idx.size()); ++i)
    out.emplace_back(columns[idx[i]], model.weights[idx[i]]);
  return out;
}

inline std::string coefficient_report(const LinearModel& model,
                                      const std::vector<std::string>& columns) {
  auto ranked = top_coefficients(model, columns, columns.size());
  std::string s = "feature\tcoefficient\trank\n";
  for (size_t i = 0; i < ranked.size(); ++i)
    s += ranked[i].first + "\t" + fmt_g17(ranked[i].second) + "\t" + std::to_string(i + 1) + "\n";
  return s;
}

}  // namespace fbt
