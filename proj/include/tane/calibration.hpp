#pragma once

// Novel-prototype calibration against the base-class memory.
//
// For a naive prototype p′ (mean of the support embeddings) and memory P_B,
// the relation scores are the bilinear attention logits
//
//   R(p′, P_B) = p′ K_N (P_B K_B)ᵀ / √d′          (one score per memory row)
//
// and the calibrated prototype adds back a softmax-weighted, K_R-projected
// memory aggregate:
//
//   p = p′ + softmax(R) P_B K_R
//
// With K_R = 0 the map is the identity on p′.

#include <cstddef>
#include <span>
#include <vector>

#include "tane/autodiff.hpp"
#include "tane/embedding_store.hpp"
#include "tane/mat.hpp"
#include "tane/rng.hpp"

namespace tane {

struct CalibrationParams {
  Mat key_novel;   ///< K_N, d×d′
  Mat key_memory;  ///< K_B, d×d′
  Mat residual;    ///< K_R, d×d

  std::size_t dim() const { return key_novel.rows(); }
  std::size_t d_prime() const { return key_novel.cols(); }
  /// Throws ShapeError on inconsistent shapes, NumericalError on non-finite entries.
  void validate() const;
};

struct CalibrationVars {
  ad::Var key_novel;
  ad::Var key_memory;
  ad::Var residual;
};

/// K_N, K_B ~ U(−1/√d, 1/√d); K_R = 0.
CalibrationParams init_calibration(std::size_t dim, std::size_t d_prime, Rng& rng);
CalibrationVars bind(ad::Tape& tape, const CalibrationParams& params, bool trainable);

/// `support` holds N·K rows, class-major. Row n of the result is the mean
/// of rows [n·K, (n+1)·K).
Mat naive_prototypes(const Mat& support, std::size_t k_shot);

struct PrototypeSet {
  Mat naive;
  Mat calibrated;
  std::vector<ClassId> class_ids;
};

/// N×B scores for every naive prototype at once.
ad::Var relation_scores(ad::Var naive, ad::Var memory, const CalibrationVars& params);
ad::Var calibrate(ad::Var naive, ad::Var memory, const CalibrationVars& params);

std::vector<double> relation_scores(std::span<const double> p_prime, const Mat& memory,
                                    const CalibrationParams& params);
Mat calibrate(const Mat& naive, const Mat& memory, const CalibrationParams& params);

}  // namespace tane
