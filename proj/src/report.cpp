#include "tane/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tane/error.hpp"

namespace tane {

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

nlohmann::ordered_json to_json(const AggregateReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = report.mode;
  j["task_count"] = report.task_count;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& m : report.metrics) metrics[m.name] = {{"mean", m.mean}, {"std", m.std}};
  j["metrics"] = std::move(metrics);
  return j;
}

AggregateReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    AggregateReport r;
    r.mode = j.at("mode").get<std::string>();
    r.task_count = j.at("task_count").get<std::size_t>();
    for (const auto& [name, v] : j.at("metrics").items()) {
      r.metrics.push_back({name, v.at("mean").get<double>(), v.at("std").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

std::string to_text(const AggregateReport& report) {
  std::size_t width = 6;
  for (const auto& m : report.metrics) width = std::max(width, m.name.size());
  std::ostringstream out;
  out << report.mode << " evaluation over " << report.task_count << " tasks\n";
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  out << pad("metric") << "    mean      std\n";
  for (const auto& m : report.metrics) {
    out << pad(m.name) << fixed(100.0 * m.mean, 2) << "    " << fixed(100.0 * m.std, 2) << '\n';
  }
  return out.str();
}

void write_openness_csv(std::ostream& out, std::span<const OpennessPoint> points) {
  out << "openness,fscore_mean,fscore_std\n";
  for (const auto& p : points) {
    out << fixed(p.openness, 6) << ',' << fixed(p.fscore_mean, 6) << ',' << fixed(p.fscore_std, 6)
        << '\n';
  }
}

void write_memory_csv(std::ostream& out, std::span<const MemoryPoint> points) {
  out << "memory_size,fscore_mean,fscore_std,auroc_neg_mean\n";
  for (const auto& p : points) {
    out << p.memory_size << ',' << fixed(p.fscore_mean, 6) << ',' << fixed(p.fscore_std, 6) << ','
        << fixed(p.auroc_neg_mean, 6) << '\n';
  }
}

std::string to_json_line(const EpisodeLog& entry) {
  nlohmann::ordered_json j;
  j["episode"] = entry.episode;
  j["lr"] = entry.lr;
  j["l_cls"] = entry.loss.l_cls;
  j["l_neg"] = entry.loss.l_neg;
  j["total"] = entry.loss.total;
  return j.dump();
}

}  // namespace tane
