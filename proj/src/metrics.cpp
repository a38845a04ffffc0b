#include "tane/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "tane/error.hpp"

namespace tane {

double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) {
    throw InsufficientData("auroc needs at least one positive and one negative score");
  }
  // (score, is_negative); walk tie groups in ascending order.
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.emplace_back(s, false);
  for (double s : neg_scores) all.emplace_back(s, true);
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Twice the Mann–Whitney U of the negatives, kept integral.
  unsigned long long twice_u = 0;
  unsigned long long pos_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    unsigned long long group_pos = 0, group_neg = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? group_neg : group_pos) += 1;
      ++j;
    }
    twice_u += group_neg * (2 * pos_below + group_pos);
    pos_below += group_pos;
    i = j;
  }
  const double pairs =
      static_cast<double>(pos_scores.size()) * static_cast<double>(neg_scores.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

double openness(std::size_t n_novel, std::size_t n_neg) {
  if (n_novel == 0) throw InvalidInput("openness with zero novel classes");
  const double two_n = 2.0 * static_cast<double>(n_novel);
  return 1.0 - std::sqrt(two_n / (two_n + static_cast<double>(n_neg)));
}

FScores fscores(std::span<const std::size_t> predictions, std::span<const std::size_t> truth,
                std::size_t num_classes) {
  if (predictions.size() != truth.size()) throw ShapeError("prediction/truth length mismatch");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predictions[i] >= num_classes) {
      throw InvalidLabel("label outside [0, " + std::to_string(num_classes) + ")");
    }
    if (predictions[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[truth[i]];
    }
  }
  FScores out;
  double weight_total = 0.0;
  std::size_t supported = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t support = tp[c] + fn[c];
    if (support == 0) continue;
    const double f1 = 2.0 * static_cast<double>(tp[c]) /
                      static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    out.weighted += static_cast<double>(support) * f1;
    out.macro += f1;
    weight_total += static_cast<double>(support);
    ++supported;
  }
  if (supported == 0) return out;
  out.weighted /= weight_total;
  out.macro /= static_cast<double>(supported);
  return out;
}

double macro_weighted_fscore(std::span<const std::size_t> predictions,
                             std::span<const std::size_t> truth, std::size_t num_classes) {
  return fscores(predictions, truth, num_classes).weighted;
}

double harmonic_mean(double a, double b) {
  if (a < 0.0 || b < 0.0) throw InvalidInput("harmonic mean of a negative value");
  const double s = a + b;
  return s == 0.0 ? 0.0 : 2.0 * a * b / s;
}

const MetricSummary* AggregateReport::find(std::string_view name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const MetricSummary& AggregateReport::at(std::string_view name) const {
  if (const auto* m = find(name)) return *m;
  throw InvalidInput("metric '" + std::string(name) + "' not in report");
}

MetricSummary summarize(std::string name, std::span<const double> values) {
  if (values.empty()) throw InsufficientData("no values to summarize for " + name);
  MetricSummary s{std::move(name), 0.0, 0.0};
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace tane
