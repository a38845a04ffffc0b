#include "tane/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tane/error.hpp"

namespace tane {

namespace {

using nlohmann::json;

/// Collects schema problems so they can be reported in one message.
class Reader {
 public:
  void check_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      errors_.push_back(prefix.empty() ? "<root>: expected an object" : prefix + ": expected an object");
      return;
    }
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
      if (!known.contains(key)) errors_.push_back("unknown key '" + prefix + key + "'");
    }
  }

  template <typename T>
  void read(const json& obj, const char* key, const std::string& prefix, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      errors_.push_back("'" + prefix + key + "': " + e.what());
    }
  }

  template <typename T>
  void read_optional(const json& obj, const char* key, const std::string& prefix,
                     std::optional<T>& out) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return;
    T value{};
    const std::size_t before = errors_.size();
    read(obj, key, prefix, value);
    if (errors_.size() == before) out = value;
  }

  void fail(std::string message) { errors_.push_back(std::move(message)); }

  void throw_if_failed() const {
    if (errors_.empty()) return;
    std::ostringstream msg;
    msg << "invalid config: ";
    for (std::size_t i = 0; i < errors_.size(); ++i) msg << (i ? "; " : "") << errors_[i];
    throw InvalidConfig(msg.str());
  }

 private:
  std::vector<std::string> errors_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

void read_classes(Reader& r, const json& obj, const char* key, std::vector<ClassId>& out) {
  if (!obj.is_object() || !obj.contains(key)) {
    r.fail(std::string("missing 'split.") + key + "'");
    return;
  }
  const json& v = obj.at(key);
  try {
    if (v.is_string()) {
      out = parse_class_range(v.get<std::string>());
    } else if (v.is_array()) {
      out.clear();
      for (const auto& x : v) {
        if (!x.is_number_unsigned()) throw InvalidConfig("class ids must be non-negative integers");
        out.push_back(x.get<ClassId>());
      }
    } else {
      throw InvalidConfig("expected an id array or \"lo:hi\"");
    }
  } catch (const std::exception& e) {
    r.fail(std::string("'split.") + key + "': " + e.what());
  }
}

TaskMode parse_mode(Reader& r, const std::string& text, const std::string& key) {
  if (text == "fsor") return TaskMode::Fsor;
  if (text == "gfsor") return TaskMode::Gfsor;
  r.fail("'" + key + "': expected \"fsor\" or \"gfsor\"");
  return TaskMode::Fsor;
}

std::size_t parse_index(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidConfig("bad class id '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

EvalOptions EvalSettings::options() const {
  EvalOptions o;
  o.num_tasks = num_tasks;
  o.seed = seed;
  o.threads = threads;
  o.scores = scores;
  o.negative_prototype = negative_prototype;
  o.gfsor_auroc_novel_only = gfsor_auroc_novel_only;
  o.memory_size = memory_size;
  return o;
}

std::vector<ClassId> parse_class_range(const std::string& text) {
  std::vector<ClassId> ids;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const std::size_t lo = parse_index(std::string_view(text).substr(0, colon));
    const std::size_t hi = parse_index(std::string_view(text).substr(colon + 1));
    if (hi < lo) throw InvalidConfig("empty class range '" + text + "'");
    for (std::size_t c = lo; c <= hi; ++c) ids.push_back(static_cast<ClassId>(c));
    return ids;
  }
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    ids.push_back(static_cast<ClassId>(parse_index(rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (ids.empty()) throw InvalidConfig("empty class list");
  return ids;
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  Reader r;
  RunConfig cfg;
  r.check_keys(doc, "", {"embeddings", "memory", "eval_embeddings", "holdout_per_class",
                         "checkpoint", "log", "report", "split", "task", "train", "eval"});
  r.throw_if_failed();

  std::string path;
  if (!doc.contains("embeddings")) r.fail("missing 'embeddings'");
  r.read(doc, "embeddings", "", path);
  cfg.embeddings = resolve(base_dir, path);
  std::optional<std::string> opt;
  r.read_optional(doc, "memory", "", opt);
  if (opt) cfg.memory = resolve(base_dir, *opt);
  opt.reset();
  r.read_optional(doc, "eval_embeddings", "", opt);
  if (opt) cfg.eval_embeddings = resolve(base_dir, *opt);
  r.read(doc, "holdout_per_class", "", cfg.holdout_per_class);
  for (auto [key, target] : {std::pair{"checkpoint", &cfg.checkpoint}, std::pair{"log", &cfg.log},
                             std::pair{"report", &cfg.report}}) {
    std::string p = target->string();
    r.read(doc, key, "", p);
    *target = resolve(base_dir, p);
  }

  if (!doc.contains("split")) {
    r.fail("missing 'split'");
  } else {
    const json& s = doc.at("split");
    r.check_keys(s, "split.", {"base_classes", "novel_pool", "neg_pool"});
    read_classes(r, s, "base_classes", cfg.split.base_classes);
    read_classes(r, s, "novel_pool", cfg.split.novel_pool);
    read_classes(r, s, "neg_pool", cfg.split.neg_pool);
  }

  if (doc.contains("task")) {
    const json& t = doc.at("task");
    r.check_keys(t, "task.", {"n_way", "k_shot", "queries_per_class", "n_neg"});
    r.read(t, "n_way", "task.", cfg.task.n_way);
    r.read(t, "k_shot", "task.", cfg.task.k_shot);
    r.read(t, "queries_per_class", "task.", cfg.task.queries_per_class);
    r.read_optional(t, "n_neg", "task.", cfg.task.n_neg);
  }
  cfg.train.n_way = cfg.task.n_way;
  cfg.train.k_shot = cfg.task.k_shot;
  cfg.train.queries_per_class = cfg.task.queries_per_class;

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    const std::string p = "train.";
    r.check_keys(t, p, {"episodes", "lr", "lr_decay_factor", "lr_decay_at", "lambda", "d_prime",
                        "seed", "mode", "exclude_conjugate_classes", "gfsor_base_count",
                        "objective"});
    r.read(t, "episodes", p, cfg.train.episodes);
    r.read(t, "lr", p, cfg.train.lr);
    r.read(t, "lr_decay_factor", p, cfg.train.lr_decay_factor);
    r.read_optional(t, "lr_decay_at", p, cfg.train.lr_decay_at);
    r.read(t, "lambda", p, cfg.train.lambda);
    r.read_optional(t, "d_prime", p, cfg.train.d_prime);
    r.read(t, "seed", p, cfg.train.seed);
    std::string mode = "fsor";
    r.read(t, "mode", p, mode);
    cfg.train.mode = parse_mode(r, mode, "train.mode");
    r.read(t, "exclude_conjugate_classes", p, cfg.train.exclude_conjugate_classes);
    r.read(t, "gfsor_base_count", p, cfg.train.gfsor_base_count);
    std::string objective = "tane";
    r.read(t, "objective", p, objective);
    if (objective == "tane") {
      cfg.train.objective = Objective::Tane;
    } else if (objective == "no_negative") {
      cfg.train.objective = Objective::NoNegative;
    } else {
      r.fail("'train.objective': expected \"tane\" or \"no_negative\"");
    }
  }

  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    const std::string p = "eval.";
    r.check_keys(e, p, {"num_tasks", "seed", "mode", "threads", "scores", "negative_prototype",
                        "gfsor_auroc_novel_only", "memory_size"});
    r.read(e, "num_tasks", p, cfg.eval.num_tasks);
    r.read(e, "seed", p, cfg.eval.seed);
    std::string mode = "fsor";
    r.read(e, "mode", p, mode);
    cfg.eval.mode = parse_mode(r, mode, "eval.mode");
    r.read(e, "threads", p, cfg.eval.threads);
    if (e.is_object() && e.contains("scores")) {
      try {
        cfg.eval.scores.clear();
        for (const auto& s : e.at("scores")) cfg.eval.scores.push_back(parse_score_kind(s.get<std::string>()));
      } catch (const std::exception& ex) {
        r.fail(std::string("'eval.scores': ") + ex.what());
      }
    }
    r.read(e, "negative_prototype", p, cfg.eval.negative_prototype);
    r.read(e, "gfsor_auroc_novel_only", p, cfg.eval.gfsor_auroc_novel_only);
    r.read_optional(e, "memory_size", p, cfg.eval.memory_size);
  }
  cfg.task.seed = cfg.eval.seed;
  r.throw_if_failed();

  cfg.split.validate();
  cfg.task.validate();
  cfg.train.validate();
  if (cfg.eval.num_tasks == 0) throw InvalidConfig("eval.num_tasks must be positive");
  if (cfg.eval.threads == 0) throw InvalidConfig("eval.threads must be positive");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

}  // namespace tane
