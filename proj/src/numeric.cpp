#include "tane/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tane/error.hpp"

namespace tane {

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("softmax of empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) throw InvalidInput("softmax of non-finite input");
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("log_sum_exp of empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine_sim length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegenerateVector("cosine_sim of zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw InvalidLabel("label " + std::to_string(label) + " with " +
                       std::to_string(logits.size()) + " classes");
  }
  // Clamp away the -0.0 / tiny negative that rounding can produce.
  return std::max(0.0, log_sum_exp(logits) - logits[label]);
}

double mse(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("mse length mismatch");
  if (u.empty()) throw ShapeError("mse of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = u[i] - v[i];
    s += diff * diff;
  }
  return s / static_cast<double>(u.size());
}

std::vector<double> sgd_step(std::span<const double> params, std::span<const double> grads,
                             double lr) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step length mismatch");
  if (!(lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("non-finite gradient at index " + std::to_string(i));
    }
    out[i] = params[i] - lr * grads[i];
  }
  return out;
}

GradCheckReport finite_diff_check(const LossFn& loss_fn, std::span<const double> params,
                                  std::span<const double> analytic_grads,
                                  const GradCheckOptions& options) {
  if (params.size() != analytic_grads.size()) {
    throw ShapeError("finite_diff_check: params/grads length mismatch");
  }
  GradCheckReport report;
  std::vector<double> probe(params.begin(), params.end());
  const double h = options.step;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = loss_fn(probe);
    probe[i] = saved - h;
    const double down = loss_fn(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("non-finite loss while probing index " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = analytic_grads[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param_index = i;
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace tane
