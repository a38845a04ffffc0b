#include "tane/classifier.hpp"

#include <algorithm>
#include <string>

#include "tane/error.hpp"
#include "tane/numeric.hpp"

namespace tane {

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "neg" || name == "NEG") return ScoreKind::Neg;
  if (name == "diff" || name == "DIFF") return ScoreKind::Diff;
  if (name == "max" || name == "MAX") return ScoreKind::Max;
  throw InvalidScoreKind("unknown score kind '" + std::string(name) + "'");
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Neg: return "neg";
    case ScoreKind::Diff: return "diff";
    case ScoreKind::Max: return "max";
  }
  return "?";
}

ad::Var cosine_logits(ad::Var queries, ad::Var prototypes, ad::Var log_temperature) {
  if (queries.cols() != prototypes.cols()) {
    throw ShapeError("query dim " + std::to_string(queries.cols()) + " != prototype dim " +
                     std::to_string(prototypes.cols()));
  }
  auto cos = ad::matmul_nt(ad::normalize_rows(queries), ad::normalize_rows(prototypes));
  return ad::mul_scalar(cos, ad::exp(log_temperature));
}

Mat cosine_logits(const Mat& queries, const Mat& prototypes, const SimilarityParams& params) {
  ad::Tape tape;
  return cosine_logits(tape.constant(queries), tape.constant(prototypes),
                       tape.constant(Mat(1, 1, params.log_temperature)))
      .value();
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

QueryScores make_scores(std::span<const double> logits, bool has_negative) {
  QueryScores s;
  s.logits.assign(logits.begin(), logits.end());
  s.probs = softmax(logits);
  s.predicted = argmax(logits);
  s.has_negative = has_negative;
  return s;
}

QueryScores score_query(std::span<const double> query, const OpenSetPrototypes& prototypes,
                        const SimilarityParams& params) {
  const Mat logits = cosine_logits(Mat::row_vector(query), prototypes.stacked(), params);
  return make_scores(logits.row(0), true);
}

std::vector<QueryScores> score_queries(const Mat& queries, const Mat& prototypes,
                                       bool has_negative, const SimilarityParams& params) {
  const Mat logits = cosine_logits(queries, prototypes, params);
  std::vector<QueryScores> out;
  out.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) out.push_back(make_scores(logits.row(i), has_negative));
  return out;
}

double detection_score(const QueryScores& scores, ScoreKind kind) {
  const auto& p = scores.probs;
  if (p.empty()) throw InvalidInput("empty score vector");
  const std::size_t known = scores.has_negative ? p.size() - 1 : p.size();
  if (known == 0) throw InvalidInput("no known-class probabilities");
  const double max_known = *std::max_element(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(known));
  switch (kind) {
    case ScoreKind::Neg:
      if (!scores.has_negative) throw InvalidScoreKind("NEG requires a negative prototype");
      return p.back();
    case ScoreKind::Diff:
      if (!scores.has_negative) throw InvalidScoreKind("DIFF requires a negative prototype");
      return p.back() - max_known;
    case ScoreKind::Max:
      return -max_known;
  }
  throw InvalidScoreKind("unknown score kind");
}

std::size_t closed_set_predict(std::span<const double> query, const Mat& novel_prototypes,
                               const SimilarityParams& params) {
  if (novel_prototypes.rows() == 0) throw InvalidInput("no novel prototypes");
  const Mat logits = cosine_logits(Mat::row_vector(query), novel_prototypes, params);
  return argmax(logits.row(0));
}

}  // namespace tane
