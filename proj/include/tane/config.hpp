#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tane/embedding_store.hpp"
#include "tane/episode_sampler.hpp"
#include "tane/evaluation.hpp"
#include "tane/trainer.hpp"
#include "json.hpp"

namespace tane {

struct EvalSettings {
  std::size_t num_tasks = 600;
  std::uint64_t seed = 0;
  TaskMode mode = TaskMode::Fsor;
  std::size_t threads = 1;
  std::vector<ScoreKind> scores = {ScoreKind::Neg, ScoreKind::Diff, ScoreKind::Max};
  bool negative_prototype = true;
  bool gfsor_auroc_novel_only = false;
  std::optional<std::size_t> memory_size;

  EvalOptions options() const;
};

/// Paths are resolved against the directory of the config file.
struct RunConfig {
  std::filesystem::path embeddings;
  /// Bank file; computed from `embeddings` over the base classes when absent.
  std::optional<std::filesystem::path> memory;
  /// Base-class query records for GFSOR evaluation.
  std::optional<std::filesystem::path> eval_embeddings;
  /// Without `eval_embeddings`, this many records per base class are held
  /// out of training and used as GFSOR base queries.
  std::size_t holdout_per_class = 0;
  std::filesystem::path checkpoint = "tane.ckpt";
  std::filesystem::path log = "train_log.jsonl";
  std::filesystem::path report = "report.json";
  SplitSpec split;
  TaskSpec task;
  TrainConfig train;
  EvalSettings eval;
};

/// Parses and validates a config document. Unknown keys and type errors
/// are collected and reported together as InvalidConfig.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Throws FormatError when the file is unreadable or not JSON.
RunConfig load_run_config(const std::filesystem::path& path);

/// "lo:hi" (inclusive) or a comma list of ids.
std::vector<ClassId> parse_class_range(const std::string& text);

}  // namespace tane
