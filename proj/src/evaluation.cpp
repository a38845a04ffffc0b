#include "tane/evaluation.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>

#include "tane/error.hpp"
#include "tane/rng.hpp"

namespace tane {

namespace {

bool wants(const EvalOptions& options, ScoreKind kind) {
  return std::find(options.scores.begin(), options.scores.end(), kind) != options.scores.end();
}

void check_options(const EvalOptions& options) {
  if (options.num_tasks == 0) throw InvalidConfig("num_tasks must be positive");
  if (!options.negative_prototype &&
      (wants(options, ScoreKind::Neg) || wants(options, ScoreKind::Diff))) {
    throw InvalidScoreKind("NEG and DIFF scores need the negative prototype");
  }
}

MemoryBank working_memory(const MemoryBank& bank, const EvalOptions& options) {
  return options.memory_size ? truncate_memory(bank, *options.memory_size) : bank;
}

struct Prototypes {
  Mat calibrated;
  std::vector<double> negative;
};

Prototypes compute_prototypes(const TaneParams& params, const FsorTask& task, const Mat& memory,
                              bool with_negative) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  auto naive = tape.constant(naive_prototypes(task.support, task.k_shot));
  auto protos = forward_prototypes(vars, naive, tape.constant(memory), with_negative);
  Prototypes out{protos.calibrated.value(), {}};
  if (with_negative) {
    const auto v = protos.negative.value().values();
    out.negative.assign(v.begin(), v.end());
  }
  return out;
}

std::size_t argmax_prefix(std::span<const double> logits, std::size_t count) {
  return argmax(logits.first(count));
}

void check_dims(const TaneParams& params, const EmbeddingSet& set, const MemoryBank& bank) {
  const std::size_t d = params.shape().dim;
  if (set.dim() != d) {
    throw ShapeError("model dim " + std::to_string(d) + " != embedding dim " +
                     std::to_string(set.dim()));
  }
  if (bank.dim() != d) {
    throw ShapeError("model dim " + std::to_string(d) + " != memory dim " +
                     std::to_string(bank.dim()));
  }
}

/// Runs `fn(i)` for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

AggregateReport aggregate(std::string mode, const std::vector<TaskMetrics>& tasks) {
  AggregateReport report;
  report.mode = std::move(mode);
  report.task_count = tasks.size();
  auto add = [&](const char* name, auto&& get) {
    std::vector<double> values;
    for (const auto& t : tasks) {
      if (auto v = get(t)) values.push_back(*v);
    }
    if (!values.empty()) report.metrics.push_back(summarize(name, values));
  };
  using Opt = std::optional<double>;
  add("acc_closed", [](const TaskMetrics& t) -> Opt { return t.acc_closed; });
  add("acc_open", [](const TaskMetrics& t) { return t.acc_open; });
  add("auroc_neg", [](const TaskMetrics& t) { return t.auroc_neg; });
  add("auroc_diff", [](const TaskMetrics& t) { return t.auroc_diff; });
  add("auroc_max", [](const TaskMetrics& t) { return t.auroc_max; });
  add("fscore", [](const TaskMetrics& t) { return t.fscore; });
  add("fscore_macro", [](const TaskMetrics& t) { return t.fscore_macro; });
  add("acc_base_joint", [](const TaskMetrics& t) -> Opt {
    return t.gfsor ? Opt(t.gfsor->acc_base_joint) : std::nullopt;
  });
  add("acc_novel_joint", [](const TaskMetrics& t) -> Opt {
    return t.gfsor ? Opt(t.gfsor->acc_novel_joint) : std::nullopt;
  });
  add("harmonic", [](const TaskMetrics& t) -> Opt {
    return t.gfsor ? Opt(t.gfsor->harmonic) : std::nullopt;
  });
  return report;
}

}  // namespace

OpenSetPrototypes task_prototypes(const TaneParams& params, const FsorTask& task,
                                  const MemoryBank& memory) {
  const MemoryBank m = select_memory(memory, task.novel_classes);
  Prototypes p = compute_prototypes(params, task, m.prototypes(), true);
  return build_open_set(p.calibrated, p.negative);
}

TaskMetrics evaluate_fsor_task(const TaneParams& params, const FsorTask& task,
                               const MemoryBank& bank, const EvalOptions& options) {
  const std::size_t n = task.n_way();
  const MemoryBank memory = select_memory(working_memory(bank, options), task.novel_classes);
  const bool with_neg = options.negative_prototype;
  const Prototypes protos = compute_prototypes(params, task, memory.prototypes(), with_neg);

  Mat classifier = protos.calibrated;
  if (with_neg) classifier = build_open_set(protos.calibrated, protos.negative).stacked();
  const auto pos = score_queries(task.pos_queries.embeddings, classifier, with_neg, params.similarity);
  const auto neg = score_queries(task.neg_queries.embeddings, classifier, with_neg, params.similarity);

  TaskMetrics m;
  std::size_t closed_hits = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (argmax_prefix(pos[i].logits, n) == task.pos_queries.labels[i]) ++closed_hits;
  }
  m.acc_closed = static_cast<double>(closed_hits) / static_cast<double>(pos.size());

  auto detection = [&](ScoreKind kind) {
    std::vector<double> ps, ns;
    for (const auto& s : pos) ps.push_back(detection_score(s, kind));
    for (const auto& s : neg) ns.push_back(detection_score(s, kind));
    return auroc(ps, ns);
  };
  if (wants(options, ScoreKind::Max)) m.auroc_max = detection(ScoreKind::Max);
  if (!with_neg) return m;

  if (wants(options, ScoreKind::Neg)) m.auroc_neg = detection(ScoreKind::Neg);
  if (wants(options, ScoreKind::Diff)) m.auroc_diff = detection(ScoreKind::Diff);

  std::vector<std::size_t> predicted, truth;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    predicted.push_back(pos[i].predicted);
    truth.push_back(task.pos_queries.labels[i]);
  }
  for (const auto& s : neg) {
    predicted.push_back(s.predicted);
    truth.push_back(n);
  }
  std::size_t open_hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) open_hits += predicted[i] == truth[i];
  m.acc_open = static_cast<double>(open_hits) / static_cast<double>(truth.size());
  const FScores f = fscores(predicted, truth, n + 1);
  m.fscore = f.weighted;
  m.fscore_macro = f.macro;
  return m;
}

TaskMetrics evaluate_gfsor_task(const TaneParams& params, const GfsorTask& task,
                                const MemoryBank& bank, const EvalOptions& options) {
  const FsorTask& inner = task.inner;
  const std::size_t n = inner.n_way();
  const MemoryBank memory = select_memory(working_memory(bank, options), inner.novel_classes);
  const Prototypes protos = compute_prototypes(params, inner, memory.prototypes(), true);
  const Mat base_rows = bank.rows_for(task.base_classes);
  const std::size_t nb = base_rows.rows();
  const Mat classifier = build_open_set(protos.calibrated, protos.negative, base_rows).stacked();

  const auto base = score_queries(task.base_queries.embeddings, classifier, true, params.similarity);
  const auto pos = score_queries(inner.pos_queries.embeddings, classifier, true, params.similarity);
  const auto neg = score_queries(inner.neg_queries.embeddings, classifier, true, params.similarity);

  // Joint prediction over base ∪ novel; masking removes the novel slots.
  auto joint = [&](const QueryScores& s) {
    return options.mask_novel_predictions ? argmax_prefix(s.logits, nb)
                                          : argmax_prefix(s.logits, nb + n);
  };

  TaskMetrics m;
  GfsorMetrics g;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < base.size(); ++i) hits += joint(base[i]) == task.base_queries.labels[i];
  g.acc_base_joint = static_cast<double>(hits) / static_cast<double>(base.size());
  hits = 0;
  std::size_t closed_hits = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    hits += joint(pos[i]) == nb + inner.pos_queries.labels[i];
    closed_hits += argmax(std::span<const double>(pos[i].logits).subspan(nb, n)) ==
                   inner.pos_queries.labels[i];
  }
  g.acc_novel_joint = static_cast<double>(hits) / static_cast<double>(pos.size());
  g.harmonic = harmonic_mean(g.acc_base_joint, g.acc_novel_joint);
  g.base_queries = base.size();
  g.novel_queries = pos.size();
  g.neg_queries = neg.size();
  m.acc_closed = static_cast<double>(closed_hits) / static_cast<double>(pos.size());

  // Known queries (base and novel unless restricted) against negatives.
  auto detection = [&](ScoreKind kind) {
    std::vector<double> ps, ns;
    if (!options.gfsor_auroc_novel_only) {
      for (const auto& s : base) ps.push_back(detection_score(s, kind));
    }
    for (const auto& s : pos) ps.push_back(detection_score(s, kind));
    for (const auto& s : neg) ns.push_back(detection_score(s, kind));
    return auroc(ps, ns);
  };
  if (wants(options, ScoreKind::Neg)) m.auroc_neg = detection(ScoreKind::Neg);
  if (wants(options, ScoreKind::Diff)) m.auroc_diff = detection(ScoreKind::Diff);
  if (wants(options, ScoreKind::Max)) m.auroc_max = detection(ScoreKind::Max);
  m.gfsor = g;
  return m;
}

Evaluation evaluate_fsor(const TaneParams& params, const EmbeddingSet& set,
                         const SplitSpec& split, const MemoryBank& bank, const TaskSpec& spec,
                         const EvalOptions& options) {
  split.validate();
  spec.validate();
  check_dims(params, set, bank);
  check_options(options);
  const TaskPools pools = TaskPools::testing(split);
  Evaluation out;
  out.tasks.resize(options.num_tasks);
  parallel_for(options.num_tasks, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, "eval-task", i));
    const FsorTask task = sample_fsor(set, pools, spec, rng);
    out.tasks[i] = evaluate_fsor_task(params, task, bank, options);
  });
  out.report = aggregate("fsor", out.tasks);
  return out;
}

Evaluation evaluate_gfsor(const TaneParams& params, const EmbeddingSet& set,
                          const EmbeddingSet& base_query_set, const SplitSpec& split,
                          const MemoryBank& bank, const TaskSpec& spec,
                          const EvalOptions& options) {
  split.validate();
  spec.validate();
  check_dims(params, set, bank);
  check_options(options);
  if (!options.negative_prototype) {
    throw InvalidConfig("generalized evaluation always uses the negative prototype");
  }
  TaskPools pools = TaskPools::testing(split);
  // Every base class in the bank takes part in the joint label space.
  pools.base = bank.class_ids();
  Evaluation out;
  out.tasks.resize(options.num_tasks);
  parallel_for(options.num_tasks, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, "eval-gfsor-task", i));
    const GfsorTask task = sample_gfsor(set, base_query_set, pools, spec, pools.base.size(), rng);
    out.tasks[i] = evaluate_gfsor_task(params, task, bank, options);
  });
  out.report = aggregate("gfsor", out.tasks);
  return out;
}

std::vector<OpennessPoint> sweep_openness(const TaneParams& params, const EmbeddingSet& set,
                                          const SplitSpec& split, const MemoryBank& bank,
                                          const TaskSpec& spec, std::size_t n_neg_lo,
                                          std::size_t n_neg_hi, const EvalOptions& options) {
  if (n_neg_lo == 0 || n_neg_lo > n_neg_hi) throw InvalidConfig("bad openness range");
  if (!options.negative_prototype) throw InvalidConfig("F-score needs the negative prototype");
  std::vector<OpennessPoint> out;
  for (std::size_t k = n_neg_lo; k <= n_neg_hi; ++k) {
    TaskSpec s = spec;
    s.n_neg = k;
    const Evaluation e = evaluate_fsor(params, set, split, bank, s, options);
    const auto& f = e.report.at("fscore");
    out.push_back({k, openness(spec.n_way, k), f.mean, f.std});
  }
  return out;
}

std::vector<std::size_t> memory_sizes(std::size_t bank_size, std::size_t max_size) {
  const std::size_t cap = std::min(bank_size, max_size);
  std::vector<std::size_t> out;
  for (std::size_t s = 1; s <= cap; s *= 2) out.push_back(s);
  if (!out.empty() && out.back() != cap) out.push_back(cap);
  return out;
}

std::vector<MemoryPoint> sweep_memory(const TaneParams& params, const EmbeddingSet& set,
                                      const SplitSpec& split, const MemoryBank& bank,
                                      const TaskSpec& spec, std::span<const std::size_t> sizes,
                                      const EvalOptions& options) {
  if (!options.negative_prototype) throw InvalidConfig("F-score needs the negative prototype");
  std::vector<MemoryPoint> out;
  for (std::size_t size : sizes) {
    EvalOptions o = options;
    o.memory_size = size;
    if (!wants(o, ScoreKind::Neg)) o.scores.push_back(ScoreKind::Neg);
    const Evaluation e = evaluate_fsor(params, set, split, bank, spec, o);
    const auto& f = e.report.at("fscore");
    out.push_back({std::min(size, bank.size()), f.mean, f.std, e.report.at("auroc_neg").mean});
  }
  return out;
}

}  // namespace tane
