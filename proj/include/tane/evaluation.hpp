#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tane/classifier.hpp"
#include "tane/embedding_store.hpp"
#include "tane/episode_sampler.hpp"
#include "tane/metrics.hpp"
#include "tane/model.hpp"

namespace tane {

struct GfsorMetrics {
  double acc_base_joint = 0.0;   ///< base queries over base ∪ novel
  double acc_novel_joint = 0.0;  ///< novel queries over base ∪ novel
  double harmonic = 0.0;
  std::size_t base_queries = 0;
  std::size_t novel_queries = 0;
  std::size_t neg_queries = 0;
};

struct TaskMetrics {
  /// N-way accuracy of positive queries, negative class excluded.
  double acc_closed = 0.0;
  /// (N+1)-way accuracy over positive and negative queries.
  std::optional<double> acc_open;
  std::optional<double> auroc_neg;
  std::optional<double> auroc_diff;
  std::optional<double> auroc_max;
  std::optional<double> fscore;
  std::optional<double> fscore_macro;
  std::optional<GfsorMetrics> gfsor;
};

struct EvalOptions {
  std::size_t num_tasks = 600;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// False evaluates the calibration-only model: no negative prototype,
  /// so only the MAX score and closed-set accuracy are produced.
  bool negative_prototype = true;
  std::vector<ScoreKind> scores = {ScoreKind::Neg, ScoreKind::Diff, ScoreKind::Max};
  /// Keep only the first `memory_size` bank rows.
  std::optional<std::size_t> memory_size;
  /// GFSOR AUROC positives: novel queries only instead of base + novel.
  bool gfsor_auroc_novel_only = false;
  /// GFSOR: never predict a novel class in the joint space (test hook).
  bool mask_novel_predictions = false;
};

struct Evaluation {
  std::vector<TaskMetrics> tasks;
  AggregateReport report;
};

/// Tasks are sampled from the split's held-out pools, one independent RNG
/// stream per task index, so results do not depend on `threads`.
Evaluation evaluate_fsor(const TaneParams& params, const EmbeddingSet& set,
                         const SplitSpec& split, const MemoryBank& bank, const TaskSpec& spec,
                         const EvalOptions& options);

/// Joint (B+N+1)-way evaluation over every base class in `bank`. Base
/// queries come from `base_query_set`.
Evaluation evaluate_gfsor(const TaneParams& params, const EmbeddingSet& set,
                          const EmbeddingSet& base_query_set, const SplitSpec& split,
                          const MemoryBank& bank, const TaskSpec& spec,
                          const EvalOptions& options);

/// Metrics of one FSOR task; exposed for tests and custom drivers.
TaskMetrics evaluate_fsor_task(const TaneParams& params, const FsorTask& task,
                               const MemoryBank& bank, const EvalOptions& options);
TaskMetrics evaluate_gfsor_task(const TaneParams& params, const GfsorTask& task,
                                const MemoryBank& bank, const EvalOptions& options);

/// Prototypes for a task, computed with the model's forward pass.
OpenSetPrototypes task_prototypes(const TaneParams& params, const FsorTask& task,
                                  const MemoryBank& memory);

struct OpennessPoint {
  std::size_t n_neg = 0;
  double openness = 0.0;
  double fscore_mean = 0.0;
  double fscore_std = 0.0;
};

std::vector<OpennessPoint> sweep_openness(const TaneParams& params, const EmbeddingSet& set,
                                          const SplitSpec& split, const MemoryBank& bank,
                                          const TaskSpec& spec, std::size_t n_neg_lo,
                                          std::size_t n_neg_hi, const EvalOptions& options);

struct MemoryPoint {
  std::size_t memory_size = 0;
  double fscore_mean = 0.0;
  double fscore_std = 0.0;
  double auroc_neg_mean = 0.0;
};

/// 1, 2, 4, ... up to min(max_size, |bank|), plus |bank| itself when it is
/// not a power of two and ≤ max_size.
std::vector<std::size_t> memory_sizes(std::size_t bank_size, std::size_t max_size = 64);

std::vector<MemoryPoint> sweep_memory(const TaneParams& params, const EmbeddingSet& set,
                                      const SplitSpec& split, const MemoryBank& bank,
                                      const TaskSpec& spec, std::span<const std::size_t> sizes,
                                      const EvalOptions& options);

}  // namespace tane
