#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "tane/autodiff.hpp"
#include "tane/envision.hpp"
#include "tane/mat.hpp"

namespace tane {

/// Trained as log τ so τ stays positive.
struct SimilarityParams {
  double log_temperature = std::log(10.0);

  double temperature() const { return std::exp(log_temperature); }
};

struct QueryScores {
  std::vector<double> logits;
  std::vector<double> probs;
  std::size_t predicted = 0;
  /// True when the last entry belongs to the negative prototype.
  bool has_negative = false;
};

enum class ScoreKind { Neg, Diff, Max };

ScoreKind parse_score_kind(std::string_view name);
std::string_view to_string(ScoreKind kind);

/// τ · cos(queryᵢ, protoⱼ) for every pair.
ad::Var cosine_logits(ad::Var queries, ad::Var prototypes, ad::Var log_temperature);
Mat cosine_logits(const Mat& queries, const Mat& prototypes, const SimilarityParams& params);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

QueryScores make_scores(std::span<const double> logits, bool has_negative);

QueryScores score_query(std::span<const double> query, const OpenSetPrototypes& prototypes,
                        const SimilarityParams& params);

/// One QueryScores per row of `queries` against the rows of `prototypes`.
std::vector<QueryScores> score_queries(const Mat& queries, const Mat& prototypes,
                                       bool has_negative, const SimilarityParams& params);

/// Oriented so that higher always means "more likely negative":
/// NEG = p(neg), DIFF = p(neg) − max known p, MAX = −max known p.
/// NEG and DIFF on closed-set scores throw InvalidScoreKind.
double detection_score(const QueryScores& scores, ScoreKind kind);

/// Argmax over the novel prototypes only.
std::size_t closed_set_predict(std::span<const double> query, const Mat& novel_prototypes,
                               const SimilarityParams& params);

}  // namespace tane
