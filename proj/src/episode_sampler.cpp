#include "tane/episode_sampler.hpp"

#include <algorithm>
#include <string>

#include "tane/error.hpp"

namespace tane {

namespace {

std::vector<ClassId> without(std::span<const ClassId> pool, std::span<const ClassId> drop) {
  std::vector<ClassId> out;
  for (ClassId c : pool) {
    if (std::find(drop.begin(), drop.end(), c) == drop.end() &&
        std::find(out.begin(), out.end(), c) == out.end()) {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<ClassId> draw_classes(std::span<const ClassId> pool, std::size_t count,
                                  const char* role, Rng& rng) {
  if (pool.size() < count) {
    throw InsufficientData(std::string(role) + " pool has " + std::to_string(pool.size()) +
                           " classes, need " + std::to_string(count));
  }
  return rng.sample(pool, count);
}

/// A random permutation of the class's records, checked for length.
std::vector<std::size_t> shuffled_records(const EmbeddingSet& set, ClassId cls,
                                          std::size_t needed, Rng& rng) {
  std::vector<std::size_t> ids = set.records_of(cls);
  if (ids.size() < needed) {
    throw InsufficientData("class " + std::to_string(cls) + " has " + std::to_string(ids.size()) +
                           " records, need " + std::to_string(needed));
  }
  rng.shuffle(ids);
  ids.resize(needed);
  return ids;
}

void append_rows(Mat& dst, std::size_t& cursor, const EmbeddingSet& set,
                 std::span<const std::size_t> ids) {
  for (std::size_t id : ids) {
    auto src = set.record(id);
    std::copy(src.begin(), src.end(), dst.row(cursor++).begin());
  }
}

/// Support and positive queries for `classes`, disjoint within each class.
void fill_novel(const EmbeddingSet& set, const TaskSpec& spec, FsorTask& task, Rng& rng) {
  const std::size_t n = task.novel_classes.size();
  const std::size_t k = spec.k_shot;
  const std::size_t q = spec.queries_per_class;
  task.k_shot = k;
  task.support = Mat(n * k, set.dim());
  task.pos_queries.embeddings = Mat(n * q, set.dim());
  std::size_t s_cursor = 0;
  std::size_t q_cursor = 0;
  for (std::size_t slot = 0; slot < n; ++slot) {
    const auto ids = shuffled_records(set, task.novel_classes[slot], k + q, rng);
    std::span<const std::size_t> all(ids);
    append_rows(task.support, s_cursor, set, all.first(k));
    append_rows(task.pos_queries.embeddings, q_cursor, set, all.subspan(k));
    task.support_ids.insert(task.support_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    task.pos_queries.record_ids.insert(task.pos_queries.record_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    task.pos_queries.labels.insert(task.pos_queries.labels.end(), q, slot);
  }
}

QuerySet draw_queries(const EmbeddingSet& set, std::span<const ClassId> classes, std::size_t q,
                      Rng& rng) {
  QuerySet out;
  out.embeddings = Mat(classes.size() * q, set.dim());
  std::size_t cursor = 0;
  for (std::size_t slot = 0; slot < classes.size(); ++slot) {
    const auto ids = shuffled_records(set, classes[slot], q, rng);
    append_rows(out.embeddings, cursor, set, ids);
    out.record_ids.insert(out.record_ids.end(), ids.begin(), ids.end());
    out.labels.insert(out.labels.end(), q, slot);
  }
  return out;
}

/// `total` queries spread round-robin over a shuffled order of the base
/// classes, so per-class counts differ by at most one.
QuerySet draw_base_queries(const EmbeddingSet& base_set, std::span<const ClassId> base_classes,
                           std::size_t total, Rng& rng) {
  const std::size_t b = base_classes.size();
  std::vector<std::size_t> order(b);
  for (std::size_t i = 0; i < b; ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::size_t> per_class(b, 0);
  for (std::size_t i = 0; i < total; ++i) ++per_class[order[i % b]];

  std::vector<std::vector<std::size_t>> picks(b);
  for (std::size_t slot = 0; slot < b; ++slot) {
    picks[slot] = shuffled_records(base_set, base_classes[slot], per_class[slot], rng);
  }

  QuerySet out;
  out.embeddings = Mat(total, base_set.dim());
  std::vector<std::size_t> used(b, 0);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t slot = order[i % b];
    const std::size_t id = picks[slot][used[slot]++];
    auto src = base_set.record(id);
    std::copy(src.begin(), src.end(), out.embeddings.row(cursor++).begin());
    out.labels.push_back(slot);
    out.record_ids.push_back(id);
  }
  return out;
}

std::vector<ClassId> draw_base_classes(const TaskPools& pools, std::span<const ClassId> taken,
                                       std::size_t base_count, Rng& rng) {
  if (base_count == 0) throw InvalidSplit("GFSOR task needs at least one base class");
  auto candidates = without(pools.base, taken);
  auto base = draw_classes(candidates, base_count, "base", rng);
  std::sort(base.begin(), base.end());
  return base;
}

}  // namespace

void TaskSpec::validate() const {
  if (n_way < 2) throw InvalidConfig("n_way must be at least 2");
  if (k_shot < 1) throw InvalidConfig("k_shot must be at least 1");
  if (queries_per_class < 1) throw InvalidConfig("queries_per_class must be at least 1");
  if (negative_ways() < 1) throw InvalidConfig("n_neg must be at least 1");
}

TaskPools TaskPools::training(const SplitSpec& split) {
  return TaskPools{split.base_classes, split.base_classes, split.base_classes};
}

TaskPools TaskPools::testing(const SplitSpec& split) {
  return TaskPools{split.novel_pool, split.neg_pool, split.base_classes};
}

FsorTask sample_fsor(const EmbeddingSet& set, const TaskPools& pools, const TaskSpec& spec,
                     Rng& rng) {
  spec.validate();
  FsorTask task;
  task.novel_classes = draw_classes(without(pools.novel, {}), spec.n_way, "novel", rng);
  task.neg_classes =
      draw_classes(without(pools.neg, task.novel_classes), spec.negative_ways(), "negative", rng);
  fill_novel(set, spec, task, rng);
  task.neg_queries = draw_queries(set, task.neg_classes, spec.queries_per_class, rng);
  return task;
}

ConjugatePair sample_conjugate_pair(const EmbeddingSet& set, const TaskPools& pools,
                                    const TaskSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t n = spec.n_way;
  auto candidates = without(pools.novel, {});
  for (ClassId c : without(pools.neg, candidates)) candidates.push_back(c);
  const auto chosen = draw_classes(candidates, 2 * n, "conjugate", rng);

  ConjugatePair pair;
  pair.task_a.novel_classes.assign(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(n));
  pair.task_b.novel_classes.assign(chosen.begin() + static_cast<std::ptrdiff_t>(n), chosen.end());
  pair.task_a.neg_classes = pair.task_b.novel_classes;
  pair.task_b.neg_classes = pair.task_a.novel_classes;
  fill_novel(set, spec, pair.task_a, rng);
  fill_novel(set, spec, pair.task_b, rng);
  pair.task_a.neg_queries = pair.task_b.pos_queries;
  pair.task_b.neg_queries = pair.task_a.pos_queries;
  return pair;
}

GfsorTask sample_gfsor(const EmbeddingSet& set, const EmbeddingSet& base_query_set,
                       const TaskPools& pools, const TaskSpec& spec, std::size_t base_count,
                       Rng& rng) {
  if (base_count == 0) throw InvalidSplit("GFSOR task needs at least one base class");
  if (spec.negative_ways() != spec.n_way) {
    throw InvalidConfig("GFSOR tasks use as many negative classes as novel classes");
  }
  GfsorTask task;
  task.inner = sample_fsor(set, pools, spec, rng);
  std::vector<ClassId> taken = task.inner.novel_classes;
  taken.insert(taken.end(), task.inner.neg_classes.begin(), task.inner.neg_classes.end());
  task.base_classes = draw_base_classes(pools, taken, base_count, rng);
  task.base_queries =
      draw_base_queries(base_query_set, task.base_classes, task.inner.pos_queries.size(), rng);
  return task;
}

GfsorPair sample_gfsor_pair(const EmbeddingSet& set, const EmbeddingSet& base_query_set,
                            const TaskPools& pools, const TaskSpec& spec, std::size_t base_count,
                            Rng& rng) {
  if (base_count == 0) throw InvalidSplit("GFSOR task needs at least one base class");
  ConjugatePair conj = sample_conjugate_pair(set, pools, spec, rng);
  std::vector<ClassId> taken = conj.task_a.novel_classes;
  taken.insert(taken.end(), conj.task_b.novel_classes.begin(), conj.task_b.novel_classes.end());

  GfsorPair pair;
  pair.task_a.base_classes = draw_base_classes(pools, taken, base_count, rng);
  pair.task_a.base_queries = draw_base_queries(base_query_set, pair.task_a.base_classes,
                                               conj.task_a.pos_queries.size(), rng);
  pair.task_b.base_classes = pair.task_a.base_classes;
  pair.task_b.base_queries = pair.task_a.base_queries;
  pair.task_a.inner = std::move(conj.task_a);
  pair.task_b.inner = std::move(conj.task_b);
  return pair;
}

}  // namespace tane
