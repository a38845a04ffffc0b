#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tane {

/// Probability that a negative query outscores a positive one, ties counted
/// as one half. Exact rank statistic, O(n log n).
double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// 1 − √(2N / (2N + n_neg)).
double openness(std::size_t n_novel, std::size_t n_neg);

struct FScores {
  /// Per-class F1 weighted by class support.
  double weighted = 0.0;
  /// Unweighted mean over classes with nonzero support.
  double macro = 0.0;
};

FScores fscores(std::span<const std::size_t> predictions, std::span<const std::size_t> truth,
                std::size_t num_classes);
double macro_weighted_fscore(std::span<const std::size_t> predictions,
                             std::span<const std::size_t> truth, std::size_t num_classes);

/// 2ab / (a + b), or 0 when a + b = 0.
double harmonic_mean(double a, double b);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

/// Per-metric mean and sample standard deviation over tasks.
struct AggregateReport {
  std::string mode;
  std::size_t task_count = 0;
  std::vector<MetricSummary> metrics;

  const MetricSummary* find(std::string_view name) const;
  /// Throws InvalidInput when the metric is absent.
  const MetricSummary& at(std::string_view name) const;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

/// Mean and (n−1)-denominator standard deviation; std = 0 for one value.
MetricSummary summarize(std::string name, std::span<const double> values);

}  // namespace tane
