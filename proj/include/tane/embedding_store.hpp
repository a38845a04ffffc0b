#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tane/mat.hpp"

namespace tane {

using ClassId = std::uint32_t;

/// Labeled feature vectors. Values are stored in double precision but are
/// always float32-representable, which is what makes file round trips exact.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  /// Validates: labels.size() == records.rows(), every label < names.size().
  EmbeddingSet(Mat records, std::vector<ClassId> labels, std::vector<std::string> class_names);

  std::size_t dim() const { return records_.cols(); }
  std::size_t size() const { return labels_.size(); }
  std::size_t num_classes() const { return class_names_.size(); }

  const Mat& records() const { return records_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::span<const double> record(std::size_t i) const { return records_.row(i); }
  /// Record indices of `cls` in file order.
  const std::vector<std::size_t>& records_of(ClassId cls) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.records_ == b.records_ && a.labels_ == b.labels_ &&
           a.class_names_ == b.class_names_;
  }

 private:
  Mat records_;
  std::vector<ClassId> labels_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<std::size_t>> by_class_;
};

/// One prototype row per base class, rows ordered like class_ids.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(Mat prototypes, std::vector<ClassId> class_ids);

  std::size_t size() const { return class_ids_.size(); }
  std::size_t dim() const { return prototypes_.cols(); }
  const Mat& prototypes() const { return prototypes_; }
  const std::vector<ClassId>& class_ids() const { return class_ids_; }
  /// Row index of `cls`; throws MissingClass if absent.
  std::size_t row_of(ClassId cls) const;
  /// Prototype rows for `classes`, in that order.
  Mat rows_for(std::span<const ClassId> classes) const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  Mat prototypes_;
  std::vector<ClassId> class_ids_;
};

/// Disjoint class roles. Meta-training draws from base_classes only;
/// evaluation draws novel and negative classes from the two held-out pools.
struct SplitSpec {
  std::vector<ClassId> base_classes;
  std::vector<ClassId> novel_pool;
  std::vector<ClassId> neg_pool;

  /// Throws InvalidSplit on overlap or an empty role.
  void validate() const;
};

struct SyntheticConfig {
  std::size_t num_classes = 20;
  std::size_t per_class = 50;
  std::size_t dim = 32;
  double separation = 10.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Class means uniform on the sphere of radius `separation`, samples are
/// mean + N(0, σ²I). Records are class-major; values rounded to float32.
EmbeddingSet generate_synthetic(const SyntheticConfig& config);

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

/// Row b = mean embedding of class b; class ids sorted ascending.
MemoryBank compute_memory_bank(const EmbeddingSet& set, std::span<const ClassId> base_classes);

/// Bank rows whose class is not in `excluded`, order preserved. Ids that
/// are not in the bank are ignored. Throws EmptyMemory if nothing remains.
MemoryBank select_memory(const MemoryBank& bank, std::span<const ClassId> excluded);

/// First `size` rows of the bank.
MemoryBank truncate_memory(const MemoryBank& bank, std::size_t size);

/// Bank files share the embedding format with exactly one record per class.
void save_memory_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_memory_bank(const std::filesystem::path& path);

struct HoldoutSplit {
  EmbeddingSet train;
  EmbeddingSet holdout;
};

/// Moves the last `per_class` records of each listed class into `holdout`.
/// Other classes stay entirely in `train`. Both keep the full class table.
HoldoutSplit split_holdout(const EmbeddingSet& set, std::span<const ClassId> classes,
                           std::size_t per_class);

}  // namespace tane
