#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tane/embedding_store.hpp"
#include "tane/episode_sampler.hpp"
#include "tane/model.hpp"
#include "tane/numeric.hpp"

namespace tane {

enum class TaskMode { Fsor, Gfsor };

/// `Tane` is the full objective. `NoNegative` drops the negative prototype
/// and trains plain N-way classification on the same conjugate episodes;
/// it is the calibration-only baseline whose MAX score is compared against.
enum class Objective { Tane, NoNegative };

struct TrainConfig {
  std::size_t episodes = 2000;
  double lr = 0.03;
  double lr_decay_factor = 10.0;
  /// Defaults to ⌊2/3 · episodes⌋.
  std::optional<std::size_t> lr_decay_at;
  double lambda = 1.0;
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries_per_class = 15;
  /// Defaults to d/2.
  std::optional<std::size_t> d_prime;
  std::uint64_t seed = 0;
  TaskMode mode = TaskMode::Fsor;
  /// Also drop the partner task's novel classes from each task's memory.
  bool exclude_conjugate_classes = false;
  /// Base classes per GFSOR training episode, capped by availability.
  std::size_t gfsor_base_count = 16;
  Objective objective = Objective::Tane;

  /// Throws InvalidConfig.
  void validate() const;
  std::size_t decay_index() const;
  double lr_at(std::size_t episode) const;
  TaskSpec task_spec() const;
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_neg = 0.0;
  double total = 0.0;
};

struct EpisodeLog {
  std::size_t episode = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainResult {
  TaneParams params;
  std::vector<EpisodeLog> log;
};

/// A loss node on a tape together with its scalar breakdown.
struct EpisodeLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

/// Memory rows for each task of a conjugate pair: the bank minus the task's
/// own novel classes, and minus the partner's too when `exclude_conjugate`.
std::pair<MemoryBank, MemoryBank> conjugate_memories(const MemoryBank& bank,
                                                     const std::vector<ClassId>& novel_a,
                                                     const std::vector<ClassId>& novel_b,
                                                     bool exclude_conjugate);

/// L = L_cls + λ L_neg over (N+1)-way logits; the partner's positive queries
/// are labeled N. Cross-entropy terms are means over their queries.
EpisodeLoss episode_loss_fsor(const ParamVars& vars, const ConjugatePair& pair,
                              const Mat& memory_a, const Mat& memory_b, double lambda);

/// N-way loss on each task's own queries with no negative prototype.
EpisodeLoss episode_loss_closed(const ParamVars& vars, const ConjugatePair& pair,
                                const Mat& memory_a, const Mat& memory_b);

/// (B+N+1)-way loss over [base, novel, neg]. The shared base queries are
/// scored by both tasks' classifiers and the two CE terms averaged. L_neg
/// sums (1/B)Σ mse(p_neg, base row) + (1/N)Σ mse(p_neg, novel row) over
/// both tasks.
EpisodeLoss episode_loss_gfsor(const ParamVars& vars, const GfsorPair& pair,
                               const MemoryBank& bank, const Mat& memory_a, const Mat& memory_b,
                               double lambda);

LossBreakdown episode_loss_fsor(const ConjugatePair& pair, const MemoryBank& bank,
                                const TaneParams& params, double lambda,
                                bool exclude_conjugate = false);
LossBreakdown episode_loss_gfsor(const GfsorPair& pair, const MemoryBank& bank,
                                 const TaneParams& params, double lambda,
                                 bool exclude_conjugate = false);

/// Loss and flattened gradient of the FSOR episode objective.
std::pair<LossBreakdown, std::vector<double>> episode_gradients(const TaneParams& params,
                                                                const ConjugatePair& pair,
                                                                const MemoryBank& bank,
                                                                double lambda,
                                                                bool exclude_conjugate = false);

using EpisodeCallback = std::function<void(const EpisodeLog&)>;

/// One conjugate pair per SGD step, sampled from the split's base classes.
/// Deterministic for a fixed cfg.seed.
TrainResult train(const EmbeddingSet& set, const SplitSpec& split, const MemoryBank& bank,
                  const TrainConfig& cfg, const EpisodeCallback& on_episode = {});
/// Builds the memory bank from `set` over split.base_classes.
TrainResult train(const EmbeddingSet& set, const SplitSpec& split, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode = {});

struct GradientProbeConfig {
  std::size_t n_way = 3;
  std::size_t k_shot = 2;
  std::size_t memory_size = 6;
  std::size_t dim = 8;
  std::size_t d_prime = 4;
  std::size_t queries_per_class = 3;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  GradCheckOptions check;
};

struct GradientProbeResult {
  GradCheckReport report;
  std::string worst_parameter;
  LossBreakdown loss;
  std::size_t parameter_count = 0;
};

/// Finite-difference check of the full FSOR episode loss on a small random
/// episode with every parameter randomized.
GradientProbeResult probe_gradients(const GradientProbeConfig& config);

}  // namespace tane
