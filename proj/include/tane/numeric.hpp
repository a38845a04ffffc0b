#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tane {

std::vector<double> softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

/// Clamped to [-1, 1]. Throws DegenerateVector on a zero-norm input.
double cosine_sim(std::span<const double> u, std::span<const double> v);

/// −log softmax(logits)[label], evaluated through log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label);

/// Mean over dimensions of the squared difference.
double mse(std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> v);

std::vector<double> sgd_step(std::span<const double> params, std::span<const double> grads,
                             double lr);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param_index = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
};

using LossFn = std::function<double(std::span<const double>)>;

/// Central-difference comparison of `analytic_grads` against `loss_fn`.
/// Relative error per coordinate is |a − n| / max(|a|, |n|, 1e-6).
GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const double> params,
                                  std::span<const double> analytic_grads,
                                  const GradCheckOptions& options = {});

}  // namespace tane
