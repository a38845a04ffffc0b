#include <algorithm>
#include <set>

#include "doctest.h"
#include "tane/episode_sampler.hpp"
#include "tane/error.hpp"
#include "tane/rng.hpp"

using namespace tane;

namespace {

const EmbeddingSet& data() {
  static const EmbeddingSet set = generate_synthetic({30, 25, 6, 5.0, 1.0, 4});
  return set;
}

std::vector<ClassId> range(ClassId lo, ClassId hi) {
  std::vector<ClassId> ids;
  for (ClassId c = lo; c < hi; ++c) ids.push_back(c);
  return ids;
}

SplitSpec split() { return {range(0, 14), range(14, 22), range(22, 30)}; }

std::set<ClassId> as_set(const std::vector<ClassId>& v) { return {v.begin(), v.end()}; }

/// Checks the structural contract of one task against the source set.
void check_task(const FsorTask& t, const TaskSpec& spec) {
  const EmbeddingSet& set = data();
  REQUIRE(t.n_way() == spec.n_way);
  CHECK(t.neg_classes.size() == spec.negative_ways());
  CHECK(as_set(t.novel_classes).size() == spec.n_way);
  for (ClassId c : t.neg_classes) CHECK_FALSE(as_set(t.novel_classes).contains(c));
  CHECK(t.support.rows() == spec.n_way * spec.k_shot);
  CHECK(t.pos_queries.size() == spec.n_way * spec.queries_per_class);
  std::set<std::size_t> used;
  for (std::size_t r = 0; r < t.support.rows(); ++r) {
    const std::size_t id = t.support_ids[r];
    CHECK(set.labels()[id] == t.novel_classes[r / spec.k_shot]);
    CHECK(used.insert(id).second);
    for (std::size_t j = 0; j < set.dim(); ++j) CHECK(t.support(r, j) == set.records()(id, j));
  }
  for (std::size_t q = 0; q < t.pos_queries.size(); ++q) {
    const std::size_t id = t.pos_queries.record_ids[q];
    CHECK(set.labels()[id] == t.novel_classes[t.pos_queries.labels[q]]);
    CHECK(used.insert(id).second);
  }
  for (std::size_t q = 0; q < t.neg_queries.size(); ++q) {
    const std::size_t id = t.neg_queries.record_ids[q];
    CHECK(set.labels()[id] == t.neg_classes[t.neg_queries.labels[q]]);
  }
}

}  // namespace

TEST_CASE("task spec validation") {
  TaskSpec s;
  CHECK_NOTHROW(s.validate());
  s.n_way = 1;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s = {};
  s.k_shot = 0;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s = {};
  s.n_neg = 0;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
}

TEST_CASE("fsor tasks respect the contract") {
  TaskSpec spec;
  spec.n_way = 4;
  spec.k_shot = 3;
  spec.queries_per_class = 5;
  const TaskPools pools = TaskPools::testing(split());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const FsorTask t = sample_fsor(data(), pools, spec, rng);
    check_task(t, spec);
    for (ClassId c : t.novel_classes) CHECK(c >= 14);
    for (ClassId c : t.novel_classes) CHECK(c < 22);
    for (ClassId c : t.neg_classes) CHECK(c >= 22);
  }
}

TEST_CASE("forced selection and determinism") {
  TaskSpec spec;
  spec.n_way = 3;
  const SplitSpec s{range(0, 5), range(5, 8), range(8, 11)};
  const TaskPools pools = TaskPools::testing(s);
  bool reordered = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const FsorTask t = sample_fsor(data(), pools, spec, a);
    CHECK(t == sample_fsor(data(), pools, spec, b));
    CHECK(as_set(t.novel_classes) == as_set(range(5, 8)));
    CHECK(as_set(t.neg_classes) == as_set(range(8, 11)));
    reordered |= t.novel_classes != range(5, 8);
  }
  CHECK(reordered);
}

TEST_CASE("insufficient classes or records") {
  TaskSpec spec;
  spec.n_way = 9;
  Rng rng(1);
  CHECK_THROWS_AS(sample_fsor(data(), TaskPools::testing(split()), spec, rng), InsufficientData);
  spec = {};
  spec.queries_per_class = 30;
  CHECK_THROWS_AS(sample_fsor(data(), TaskPools::testing(split()), spec, rng), InsufficientData);
}

TEST_CASE("conjugate pairs swap roles") {
  TaskSpec spec;
  spec.n_way = 5;
  spec.k_shot = 1;
  spec.queries_per_class = 4;
  const TaskPools pools = TaskPools::training(split());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const ConjugatePair p = sample_conjugate_pair(data(), pools, spec, rng);
    check_task(p.task_a, spec);
    check_task(p.task_b, spec);
    CHECK(p.task_a.neg_queries == p.task_b.pos_queries);
    CHECK(p.task_b.neg_queries == p.task_a.pos_queries);
    CHECK(p.task_a.neg_classes == p.task_b.novel_classes);
    CHECK(p.task_b.neg_classes == p.task_a.novel_classes);
    for (ClassId c : p.task_a.novel_classes) CHECK(c < 14);
  }
}

TEST_CASE("conjugate pair over exactly 2N classes covers the pool") {
  TaskSpec spec;
  spec.n_way = 3;
  const SplitSpec s{range(0, 6), range(6, 8), range(8, 10)};
  Rng rng(3);
  const ConjugatePair p = sample_conjugate_pair(data(), TaskPools::training(s), spec, rng);
  std::set<ClassId> all = as_set(p.task_a.novel_classes);
  for (ClassId c : p.task_b.novel_classes) all.insert(c);
  CHECK(all == as_set(range(0, 6)));
}

TEST_CASE("gfsor tasks") {
  TaskSpec spec;
  spec.n_way = 5;
  spec.queries_per_class = 15;
  const TaskPools pools = TaskPools::testing(split());
  Rng rng(8);
  const GfsorTask t = sample_gfsor(data(), data(), pools, spec, 6, rng);
  check_task(t.inner, spec);
  CHECK(t.base_classes.size() == 6);
  CHECK(std::is_sorted(t.base_classes.begin(), t.base_classes.end()));
  CHECK(t.base_queries.size() == 75);
  CHECK(t.inner.pos_queries.size() == 75);
  CHECK(t.inner.neg_queries.size() == 75);
  for (std::size_t q = 0; q < t.base_queries.size(); ++q) {
    CHECK(data().labels()[t.base_queries.record_ids[q]] == t.base_classes[t.base_queries.labels[q]]);
  }
  CHECK_THROWS_AS(sample_gfsor(data(), data(), pools, spec, 0, rng), InvalidSplit);

  const GfsorPair pair = sample_gfsor_pair(data(), data(), TaskPools::training(split()), spec, 4, rng);
  CHECK(pair.task_a.base_classes == pair.task_b.base_classes);
  CHECK(pair.task_a.base_queries == pair.task_b.base_queries);
  CHECK(pair.task_a.inner.neg_queries == pair.task_b.inner.pos_queries);
  for (ClassId c : pair.task_a.base_classes) {
    CHECK_FALSE(as_set(pair.task_a.inner.novel_classes).contains(c));
    CHECK_FALSE(as_set(pair.task_b.inner.novel_classes).contains(c));
  }
}
