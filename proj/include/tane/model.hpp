#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tane/autodiff.hpp"
#include "tane/calibration.hpp"
#include "tane/classifier.hpp"
#include "tane/envision.hpp"

namespace tane {

struct ModelShape {
  std::size_t dim = 0;
  std::size_t d_prime = 0;
  std::size_t generator_hidden = kDefaultGeneratorHidden;
  std::size_t mapping_hidden = 0;

  /// d′ = d/2 and h_h = d unless given.
  static ModelShape for_dim(std::size_t dim, std::size_t d_prime = 0);
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Every trainable tensor of the model.
struct TaneParams {
  CalibrationParams calibration;
  EnvisionParams envision;
  SimilarityParams similarity;

  ModelShape shape() const;
  void validate() const;

  static TaneParams initialize(const ModelShape& shape, std::uint64_t seed);

  friend bool operator==(const TaneParams& a, const TaneParams& b);
};

/// Named view of one parameter tensor, in checkpoint order.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

std::vector<ParamBlock> parameter_blocks(TaneParams& params);
std::size_t parameter_count(const TaneParams& params);
std::vector<double> flatten(const TaneParams& params);
void unflatten(std::span<const double> flat, TaneParams& params);
/// e.g. "envision.mapping.w1[17]" for a flat index.
std::string parameter_name(const TaneParams& params, std::size_t flat_index);

/// Every parameter drawn at random, including the zero-initialised blocks.
/// Used to probe gradients through paths that start out inactive.
TaneParams randomized_params(const ModelShape& shape, std::uint64_t seed, double scale = 0.5);

struct ParamVars {
  CalibrationVars calibration;
  EnvisionVars envision;
  ad::Var log_temperature;

  /// Same order as parameter_blocks().
  std::vector<ad::Var> all() const;
};

ParamVars bind(ad::Tape& tape, const TaneParams& params, bool trainable);
/// Gradients of every parameter after tape.backward(), flattened.
std::vector<double> gradients(const ParamVars& vars);

/// Calibrated novel prototypes plus, optionally, the envisioned negative.
struct TaskPrototypes {
  ad::Var naive;
  ad::Var calibrated;
  ad::Var negative;  ///< 1×d; unset when with_negative is false
  bool has_negative = false;
};

TaskPrototypes forward_prototypes(const ParamVars& vars, ad::Var naive, ad::Var memory,
                                  bool with_negative = true);

/// Checkpoint: "TANE", u32 version, u32 d, d′, h_g, h_h, then every block as
/// little-endian f64 in parameter_blocks() order.
void save_checkpoint(const TaneParams& params, const std::filesystem::path& path);
TaneParams load_checkpoint(const std::filesystem::path& path);

}  // namespace tane
