#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tane/embedding_store.hpp"
#include "tane/mat.hpp"
#include "tane/rng.hpp"

namespace tane {

struct TaskSpec {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t queries_per_class = 15;
  /// Number of negative classes; defaults to n_way. Openness sweeps vary it.
  std::optional<std::size_t> n_neg;
  std::uint64_t seed = 0;

  std::size_t negative_ways() const { return n_neg.value_or(n_way); }
  /// Throws InvalidConfig unless N ≥ 2, K ≥ 1, Q ≥ 1 and n_neg ≥ 1.
  void validate() const;
};

/// Candidate classes for each role. During meta-training all three are the
/// base classes; the sampler keeps the roles disjoint within a task.
struct TaskPools {
  std::vector<ClassId> novel;
  std::vector<ClassId> neg;
  std::vector<ClassId> base;

  static TaskPools training(const SplitSpec& split);
  static TaskPools testing(const SplitSpec& split);
};

/// Query embeddings with their task-local labels and source record ids.
struct QuerySet {
  Mat embeddings;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> record_ids;

  std::size_t size() const { return labels.size(); }
  friend bool operator==(const QuerySet&, const QuerySet&) = default;
};

struct FsorTask {
  std::vector<ClassId> novel_classes;
  std::vector<ClassId> neg_classes;
  std::size_t k_shot = 0;
  /// N·K rows, class-major: rows [n·K, (n+1)·K) belong to novel_classes[n].
  Mat support;
  std::vector<std::size_t> support_ids;
  /// Labels are slots in novel_classes.
  QuerySet pos_queries;
  /// Labels are slots in neg_classes.
  QuerySet neg_queries;

  std::size_t n_way() const { return novel_classes.size(); }
  friend bool operator==(const FsorTask&, const FsorTask&) = default;
};

struct ConjugatePair {
  FsorTask task_a;
  FsorTask task_b;
};

struct GfsorTask {
  FsorTask inner;
  /// Sorted ascending; base query labels are slots in this list.
  std::vector<ClassId> base_classes;
  QuerySet base_queries;
};

struct GfsorPair {
  GfsorTask task_a;
  GfsorTask task_b;
};

FsorTask sample_fsor(const EmbeddingSet& set, const TaskPools& pools, const TaskSpec& spec,
                     Rng& rng);

/// Draws 2N classes from novel ∪ neg pools; each task's negatives are the
/// other's positive queries, copied element for element.
ConjugatePair sample_conjugate_pair(const EmbeddingSet& set, const TaskPools& pools,
                                    const TaskSpec& spec, Rng& rng);

/// Base queries come from `base_query_set` (held-out records of the base
/// classes). Pass the same set twice when no hold-out exists.
GfsorTask sample_gfsor(const EmbeddingSet& set, const EmbeddingSet& base_query_set,
                       const TaskPools& pools, const TaskSpec& spec, std::size_t base_count,
                       Rng& rng);

/// Conjugate GFSOR pair sharing one set of base classes and base queries.
GfsorPair sample_gfsor_pair(const EmbeddingSet& set, const EmbeddingSet& base_query_set,
                            const TaskPools& pools, const TaskSpec& spec, std::size_t base_count,
                            Rng& rng);

}  // namespace tane
