#pragma once

// Task-adaptive negative prototype.
//
//   W_N   = P_N K′_N (P_B K′_B)ᵀ / √d′                 N×B relation matrix
//   W_neg = g(mean over the N rows of W_N)              1×B
//   a     = softmax(W_neg) P_B                          attention aggregate
//   p_neg = a + h(a)                                    residual mapping
//
// g is a scalar 1→h_g→1 MLP shared across memory columns, so it accepts any
// N and any B. h is a d→h_h→d MLP whose output layer starts at zero.

#include <cstddef>
#include <optional>
#include <vector>

#include "tane/autodiff.hpp"
#include "tane/mat.hpp"
#include "tane/rng.hpp"

namespace tane {

/// Two-layer perceptron y = relu(x W1 + b1) W2 + b2, weights stored
/// input-major (W1 is in×hidden).
struct Mlp {
  Mat w1, b1, w2, b2;

  std::size_t in() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t out() const { return w2.cols(); }
  void validate() const;
};

struct MlpVars {
  ad::Var w1, b1, w2, b2;
};

ad::Var apply(const MlpVars& mlp, ad::Var x);

struct EnvisionParams {
  Mat key_novel;   ///< K′_N, d×d′
  Mat key_memory;  ///< K′_B, d×d′
  Mlp generator;   ///< g, 1→h_g→1
  Mlp mapping;     ///< h, d→h_h→d

  std::size_t dim() const { return key_novel.rows(); }
  std::size_t d_prime() const { return key_novel.cols(); }
  void validate() const;
};

struct EnvisionVars {
  ad::Var key_novel;
  ad::Var key_memory;
  MlpVars generator;
  MlpVars mapping;
};

inline constexpr std::size_t kDefaultGeneratorHidden = 8;

/// g starts as an exact passthrough (relu(x) − relu(−x) on two hidden units,
/// the rest with zero output weight); h's output layer starts at zero.
EnvisionParams init_envision(std::size_t dim, std::size_t d_prime, std::size_t generator_hidden,
                             std::size_t mapping_hidden, Rng& rng);
EnvisionVars bind(ad::Tape& tape, const EnvisionParams& params, bool trainable);

ad::Var negative_relation(ad::Var novel, ad::Var memory, const EnvisionVars& params);
ad::Var generate_negative_relation(ad::Var w_n, const EnvisionVars& params);
ad::Var envision_negative(ad::Var w_neg, ad::Var memory, const EnvisionVars& params);

Mat negative_relation(const Mat& novel, const Mat& memory, const EnvisionParams& params);
std::vector<double> generate_negative_relation(const Mat& w_n, const EnvisionParams& params);
std::vector<double> envision_negative(std::span<const double> w_neg, const Mat& memory,
                                      const EnvisionParams& params);

/// Prototype list for the open-set classifier. Order when stacked:
/// base rows (generalized mode only), novel rows, then the negative.
struct OpenSetPrototypes {
  Mat novel;
  std::vector<double> negative;
  std::optional<Mat> base;

  std::size_t size() const;
  std::size_t negative_index() const { return size() - 1; }
  std::size_t novel_offset() const { return base ? base->rows() : 0; }
  Mat stacked() const;
};

OpenSetPrototypes build_open_set(const Mat& novel, std::span<const double> p_neg,
                                 const std::optional<Mat>& base = std::nullopt);

}  // namespace tane
