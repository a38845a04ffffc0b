#include "tane/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "tane/error.hpp"
#include "tane/rng.hpp"

namespace tane {

namespace {

std::vector<std::size_t> constant_labels(std::size_t count, std::size_t label) {
  return std::vector<std::size_t>(count, label);
}

struct TaskForward {
  TaskPrototypes prototypes;
  ad::Var classifier;  ///< stacked [base?, novel, neg?]
};

TaskForward forward_task(const ParamVars& vars, const FsorTask& task, const Mat& memory,
                         const Mat* base_rows, bool with_negative) {
  ad::Tape& tape = *vars.log_temperature.tape;
  auto naive = tape.constant(naive_prototypes(task.support, task.k_shot));
  auto mem = tape.constant(memory);
  TaskForward out{forward_prototypes(vars, naive, mem, with_negative), {}};
  std::vector<ad::Var> parts;
  if (base_rows != nullptr) parts.push_back(tape.constant(*base_rows));
  parts.push_back(out.prototypes.calibrated);
  if (with_negative) parts.push_back(out.prototypes.negative);
  out.classifier = parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
  return out;
}

ad::Var ce(const ParamVars& vars, const Mat& queries, ad::Var classifier,
           std::span<const std::size_t> labels) {
  ad::Tape& tape = *vars.log_temperature.tape;
  auto logits = cosine_logits(tape.constant(queries), classifier, vars.log_temperature);
  return ad::cross_entropy_mean(logits, labels);
}

std::vector<std::size_t> shifted(std::span<const std::size_t> labels, std::size_t offset) {
  std::vector<std::size_t> out(labels.begin(), labels.end());
  for (auto& l : out) l += offset;
  return out;
}

EpisodeLoss combine(ad::Var l_cls, ad::Var l_neg, double lambda) {
  auto total = ad::add(l_cls, ad::scale(l_neg, lambda));
  return EpisodeLoss{total, LossBreakdown{l_cls.scalar(), l_neg.scalar(), total.scalar()}};
}

std::size_t gfsor_base_count(const TrainConfig& cfg, const SplitSpec& split) {
  const std::size_t available = split.base_classes.size() - std::min(split.base_classes.size(), 2 * cfg.n_way);
  return std::min(cfg.gfsor_base_count, available);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidConfig("lr must be positive");
  if (!(lr_decay_factor > 0.0) || !std::isfinite(lr_decay_factor)) {
    throw InvalidConfig("lr_decay_factor must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidConfig("lambda must be >= 0");
  if (lr_decay_at && *lr_decay_at > episodes) throw InvalidConfig("lr_decay_at exceeds episodes");
  if (d_prime && *d_prime == 0) throw InvalidConfig("d_prime must be positive");
  if (mode == TaskMode::Gfsor && gfsor_base_count == 0) {
    throw InvalidConfig("gfsor_base_count must be positive");
  }
  task_spec().validate();
}

std::size_t TrainConfig::decay_index() const {
  return lr_decay_at.value_or(episodes * 2 / 3);
}

double TrainConfig::lr_at(std::size_t episode) const {
  return episode < decay_index() ? lr : lr / lr_decay_factor;
}

TaskSpec TrainConfig::task_spec() const {
  TaskSpec s;
  s.n_way = n_way;
  s.k_shot = k_shot;
  s.queries_per_class = queries_per_class;
  s.seed = seed;
  return s;
}

std::pair<MemoryBank, MemoryBank> conjugate_memories(const MemoryBank& bank,
                                                     const std::vector<ClassId>& novel_a,
                                                     const std::vector<ClassId>& novel_b,
                                                     bool exclude_conjugate) {
  if (!exclude_conjugate) return {select_memory(bank, novel_a), select_memory(bank, novel_b)};
  std::vector<ClassId> both = novel_a;
  both.insert(both.end(), novel_b.begin(), novel_b.end());
  MemoryBank m = select_memory(bank, both);
  return {m, m};
}

EpisodeLoss episode_loss_fsor(const ParamVars& vars, const ConjugatePair& pair,
                              const Mat& memory_a, const Mat& memory_b, double lambda) {
  const FsorTask& a = pair.task_a;
  const FsorTask& b = pair.task_b;
  if (a.n_way() != b.n_way()) throw ShapeError("conjugate tasks differ in N");
  const std::size_t n = a.n_way();

  auto fa = forward_task(vars, a, memory_a, nullptr, true);
  auto fb = forward_task(vars, b, memory_b, nullptr, true);

  const auto neg_a = constant_labels(a.neg_queries.size(), n);
  const auto neg_b = constant_labels(b.neg_queries.size(), n);
  auto cls_a = ad::add(ce(vars, a.pos_queries.embeddings, fa.classifier, a.pos_queries.labels),
                       ce(vars, a.neg_queries.embeddings, fa.classifier, neg_a));
  auto cls_b = ad::add(ce(vars, b.pos_queries.embeddings, fb.classifier, b.pos_queries.labels),
                       ce(vars, b.neg_queries.embeddings, fb.classifier, neg_b));
  auto l_cls = ad::add(cls_a, cls_b);

  auto l_neg = ad::add(ad::mean_mse_to_rows(fa.prototypes.negative, fa.prototypes.calibrated),
                       ad::mean_mse_to_rows(fb.prototypes.negative, fb.prototypes.calibrated));
  return combine(l_cls, l_neg, lambda);
}

EpisodeLoss episode_loss_closed(const ParamVars& vars, const ConjugatePair& pair,
                                const Mat& memory_a, const Mat& memory_b) {
  auto fa = forward_task(vars, pair.task_a, memory_a, nullptr, false);
  auto fb = forward_task(vars, pair.task_b, memory_b, nullptr, false);
  auto l_cls = ad::add(
      ce(vars, pair.task_a.pos_queries.embeddings, fa.classifier, pair.task_a.pos_queries.labels),
      ce(vars, pair.task_b.pos_queries.embeddings, fb.classifier, pair.task_b.pos_queries.labels));
  auto zero = vars.log_temperature.tape->constant(Mat(1, 1, 0.0));
  return combine(l_cls, zero, 0.0);
}

EpisodeLoss episode_loss_gfsor(const ParamVars& vars, const GfsorPair& pair,
                               const MemoryBank& bank, const Mat& memory_a, const Mat& memory_b,
                               double lambda) {
  const GfsorTask& a = pair.task_a;
  const GfsorTask& b = pair.task_b;
  if (a.base_classes.empty()) throw InvalidSplit("GFSOR pair without base classes");
  if (a.base_classes != b.base_classes) throw InvalidSplit("GFSOR pair must share base classes");
  ad::Tape& tape = *vars.log_temperature.tape;
  const Mat base_rows = bank.rows_for(a.base_classes);
  const std::size_t nb = base_rows.rows();
  const std::size_t n = a.inner.n_way();

  auto fa = forward_task(vars, a.inner, memory_a, &base_rows, true);
  auto fb = forward_task(vars, b.inner, memory_b, &base_rows, true);

  auto task_cls = [&](const GfsorTask& t, const TaskForward& f) {
    const auto pos = shifted(t.inner.pos_queries.labels, nb);
    const auto neg = constant_labels(t.inner.neg_queries.size(), nb + n);
    return ad::add(ce(vars, t.inner.pos_queries.embeddings, f.classifier, pos),
                   ce(vars, t.inner.neg_queries.embeddings, f.classifier, neg));
  };
  auto base_ce = ad::scale(
      ad::add(ce(vars, a.base_queries.embeddings, fa.classifier, a.base_queries.labels),
              ce(vars, b.base_queries.embeddings, fb.classifier, b.base_queries.labels)),
      0.5);
  auto l_cls = ad::add(ad::add(task_cls(a, fa), task_cls(b, fb)), base_ce);

  auto base_var = tape.constant(base_rows);
  auto penalty = [&](const TaskForward& f) {
    return ad::add(ad::mean_mse_to_rows(f.prototypes.negative, base_var),
                   ad::mean_mse_to_rows(f.prototypes.negative, f.prototypes.calibrated));
  };
  auto l_neg = ad::add(penalty(fa), penalty(fb));
  return combine(l_cls, l_neg, lambda);
}

LossBreakdown episode_loss_fsor(const ConjugatePair& pair, const MemoryBank& bank,
                                const TaneParams& params, double lambda, bool exclude_conjugate) {
  const auto [ma, mb] = conjugate_memories(bank, pair.task_a.novel_classes,
                                           pair.task_b.novel_classes, exclude_conjugate);
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  return episode_loss_fsor(vars, pair, ma.prototypes(), mb.prototypes(), lambda).breakdown;
}

LossBreakdown episode_loss_gfsor(const GfsorPair& pair, const MemoryBank& bank,
                                 const TaneParams& params, double lambda, bool exclude_conjugate) {
  const auto [ma, mb] = conjugate_memories(bank, pair.task_a.inner.novel_classes,
                                           pair.task_b.inner.novel_classes, exclude_conjugate);
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  return episode_loss_gfsor(vars, pair, bank, ma.prototypes(), mb.prototypes(), lambda).breakdown;
}

std::pair<LossBreakdown, std::vector<double>> episode_gradients(const TaneParams& params,
                                                                const ConjugatePair& pair,
                                                                const MemoryBank& bank,
                                                                double lambda,
                                                                bool exclude_conjugate) {
  const auto [ma, mb] = conjugate_memories(bank, pair.task_a.novel_classes,
                                           pair.task_b.novel_classes, exclude_conjugate);
  ad::Tape tape;
  auto vars = bind(tape, params, true);
  auto loss = episode_loss_fsor(vars, pair, ma.prototypes(), mb.prototypes(), lambda);
  tape.backward(loss.total);
  return {loss.breakdown, gradients(vars)};
}

TrainResult train(const EmbeddingSet& set, const SplitSpec& split, const MemoryBank& bank,
                  const TrainConfig& cfg, const EpisodeCallback& on_episode) {
  cfg.validate();
  if (bank.dim() != set.dim()) throw ShapeError("memory dim != embedding dim");
  const TaskPools pools = TaskPools::training(split);
  const TaskSpec spec = cfg.task_spec();
  const std::size_t base_count = cfg.mode == TaskMode::Gfsor ? gfsor_base_count(cfg, split) : 0;
  if (cfg.mode == TaskMode::Gfsor && base_count == 0) {
    throw InsufficientData("no base classes left for GFSOR episodes");
  }

  TrainResult result{TaneParams::initialize(ModelShape::for_dim(set.dim(), cfg.d_prime.value_or(0)),
                                            cfg.seed),
                     {}};
  result.log.reserve(cfg.episodes);
  std::vector<double> flat = flatten(result.params);

  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    try {
      Rng rng(derive_seed(cfg.seed, "episode", e));
      ad::Tape tape;
      auto vars = bind(tape, result.params, true);
      EpisodeLoss loss;
      if (cfg.mode == TaskMode::Fsor) {
        const ConjugatePair pair = sample_conjugate_pair(set, pools, spec, rng);
        const auto [ma, mb] = conjugate_memories(bank, pair.task_a.novel_classes,
                                                 pair.task_b.novel_classes,
                                                 cfg.exclude_conjugate_classes);
        loss = cfg.objective == Objective::Tane
                   ? episode_loss_fsor(vars, pair, ma.prototypes(), mb.prototypes(), cfg.lambda)
                   : episode_loss_closed(vars, pair, ma.prototypes(), mb.prototypes());
      } else {
        if (cfg.objective != Objective::Tane) {
          throw InvalidConfig("the no-negative objective is FSOR only");
        }
        const GfsorPair pair = sample_gfsor_pair(set, set, pools, spec, base_count, rng);
        const auto [ma, mb] = conjugate_memories(bank, pair.task_a.inner.novel_classes,
                                                 pair.task_b.inner.novel_classes,
                                                 cfg.exclude_conjugate_classes);
        loss = episode_loss_gfsor(vars, pair, bank, ma.prototypes(), mb.prototypes(), cfg.lambda);
      }
      if (!std::isfinite(loss.breakdown.total)) throw NumericalError("non-finite loss");
      tape.backward(loss.total);
      const double lr = cfg.lr_at(e);
      flat = sgd_step(flat, gradients(vars), lr);
      unflatten(flat, result.params);
      for (double v : flat) {
        if (!std::isfinite(v)) throw NumericalError("non-finite parameter after update");
      }
      result.log.push_back(EpisodeLog{e, lr, loss.breakdown});
      if (on_episode) on_episode(result.log.back());
    } catch (const NumericalError& err) {
      if (err.has_episode()) throw;
      throw NumericalError(err.detail(), e);
    }
  }
  return result;
}

TrainResult train(const EmbeddingSet& set, const SplitSpec& split, const TrainConfig& cfg,
                  const EpisodeCallback& on_episode) {
  split.validate();
  return train(set, split, compute_memory_bank(set, split.base_classes), cfg, on_episode);
}

GradientProbeResult probe_gradients(const GradientProbeConfig& config) {
  const std::size_t n = config.n_way;
  SyntheticConfig data;
  data.num_classes = 2 * n + config.memory_size;
  data.per_class = config.k_shot + config.queries_per_class;
  data.dim = config.dim;
  data.separation = 3.0;
  data.noise_sigma = 1.0;
  data.seed = derive_seed(config.seed, "probe-data");
  const EmbeddingSet set = generate_synthetic(data);

  std::vector<ClassId> task_classes(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) task_classes[i] = static_cast<ClassId>(i);
  std::vector<ClassId> memory_classes(config.memory_size);
  for (std::size_t i = 0; i < config.memory_size; ++i) {
    memory_classes[i] = static_cast<ClassId>(2 * n + i);
  }
  const MemoryBank bank = compute_memory_bank(set, memory_classes);

  TaskSpec spec;
  spec.n_way = n;
  spec.k_shot = config.k_shot;
  spec.queries_per_class = config.queries_per_class;
  Rng rng(derive_seed(config.seed, "probe-episode"));
  const ConjugatePair pair =
      sample_conjugate_pair(set, TaskPools{task_classes, task_classes, {}}, spec, rng);

  TaneParams params = randomized_params(ModelShape::for_dim(config.dim, config.d_prime),
                                        derive_seed(config.seed, "probe-params"));
  const auto [loss, grads] = episode_gradients(params, pair, bank, config.lambda);

  TaneParams scratch = params;
  auto loss_fn = [&](std::span<const double> theta) {
    unflatten(theta, scratch);
    return episode_loss_fsor(pair, bank, scratch, config.lambda).total;
  };
  const auto flat = flatten(params);
  GradientProbeResult out;
  out.report = finite_diff_check(loss_fn, flat, grads, config.check);
  out.worst_parameter = parameter_name(params, out.report.worst_param_index);
  out.loss = loss;
  out.parameter_count = flat.size();
  return out;
}

}  // namespace tane
