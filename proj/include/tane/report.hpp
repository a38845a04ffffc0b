#pragma once

#include <ostream>
#include <span>
#include <string>

#include "tane/evaluation.hpp"
#include "tane/trainer.hpp"
#include "json.hpp"

namespace tane {

/// {"mode", "task_count", "metrics": {name: {"mean", "std"}}}
nlohmann::ordered_json to_json(const AggregateReport& report);
AggregateReport report_from_json(const nlohmann::ordered_json& j);

/// Aligned columns: metric, mean, std.
std::string to_text(const AggregateReport& report);

/// Header "openness,fscore_mean,fscore_std", one row per point.
void write_openness_csv(std::ostream& out, std::span<const OpennessPoint> points);
/// Header "memory_size,fscore_mean,fscore_std,auroc_neg_mean".
void write_memory_csv(std::ostream& out, std::span<const MemoryPoint> points);

/// One JSON object per line: episode, lr, l_cls, l_neg, total.
std::string to_json_line(const EpisodeLog& entry);

}  // namespace tane
