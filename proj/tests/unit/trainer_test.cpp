#include <numeric>

#include "doctest.h"
#include "tane/error.hpp"
#include "tane/rng.hpp"
#include "tane/trainer.hpp"
#include "test_util.hpp"

using namespace tane;

namespace {

std::vector<ClassId> range(ClassId lo, ClassId hi) {
  std::vector<ClassId> ids(hi - lo);
  std::iota(ids.begin(), ids.end(), lo);
  return ids;
}

const EmbeddingSet& data() {
  static const EmbeddingSet set = generate_synthetic({24, 20, 8, 4.0, 1.0, 12});
  return set;
}

SplitSpec split() { return {range(0, 16), range(16, 20), range(20, 24)}; }

TaskSpec small_spec() {
  TaskSpec s;
  s.n_way = 3;
  s.k_shot = 2;
  s.queries_per_class = 4;
  return s;
}

ConjugatePair pair_for(std::uint64_t seed) {
  Rng rng(seed);
  return sample_conjugate_pair(data(), TaskPools::training(split()), small_spec(), rng);
}

MemoryBank bank() { return compute_memory_bank(data(), split().base_classes); }

}  // namespace

TEST_CASE("train config validation and schedule") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.decay_index() == 1333);
  CHECK(cfg.lr_at(0) == cfg.lr);
  CHECK(cfg.lr_at(1332) == cfg.lr);
  CHECK(cfg.lr_at(1333) == doctest::Approx(cfg.lr / 10.0));
  cfg.lr_decay_at = 5;
  CHECK(cfg.lr_at(5) == doctest::Approx(cfg.lr / 10.0));
  cfg = {};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.lambda = -0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("memory exclusion") {
  const MemoryBank b = bank();
  const std::vector<ClassId> a{0, 1, 2}, c{3, 4, 5};
  const auto [ma, mb] = conjugate_memories(b, a, c, false);
  CHECK(ma.size() == 13);
  CHECK_THROWS_AS(ma.row_of(1), MissingClass);
  CHECK(ma.row_of(4) < ma.size());
  CHECK_THROWS_AS(mb.row_of(4), MissingClass);
  const auto [xa, xb] = conjugate_memories(b, a, c, true);
  CHECK(xa.size() == 10);
  CHECK(xb.size() == 10);
}

TEST_CASE("lambda zero leaves only the classification loss") {
  const TaneParams p = randomized_params(ModelShape::for_dim(8, 4), 1);
  const LossBreakdown l = episode_loss_fsor(pair_for(1), bank(), p, 0.0);
  CHECK(l.total == l.l_cls);
  CHECK(l.l_neg > 0.0);
  const LossBreakdown l2 = episode_loss_fsor(pair_for(1), bank(), p, 2.0);
  CHECK(l2.total == doctest::Approx(l.l_cls + 2.0 * l.l_neg).epsilon(1e-13));
}

TEST_CASE("negative loss vanishes when every prototype coincides") {
  // All records equal, so naive prototypes, memory rows and the attention
  // aggregate are the same vector; zero residual and mapping keep it there.
  const std::size_t d = 4;
  Mat records(12 * 6, d, 0.0);
  std::vector<ClassId> labels;
  for (std::size_t r = 0; r < records.rows(); ++r) {
    records(r, 0) = 1.0;
    records(r, 2) = -2.0;
    labels.push_back(static_cast<ClassId>(r / 6));
  }
  std::vector<std::string> names(12, "c");
  const EmbeddingSet same(records, labels, names);
  const SplitSpec s{range(0, 6), range(6, 9), range(9, 12)};
  Rng rng(0);
  const ConjugatePair pair = sample_conjugate_pair(same, TaskPools::training(s), small_spec(), rng);
  const TaneParams p = TaneParams::initialize(ModelShape::for_dim(d), 0);
  const LossBreakdown l = episode_loss_fsor(pair, compute_memory_bank(same, s.base_classes), p, 1.0);
  CHECK(l.l_neg == doctest::Approx(0.0).epsilon(1e-24));
}

TEST_CASE("episode gradients pass the finite-difference check") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GradientProbeConfig cfg;
    cfg.seed = seed;
    const GradientProbeResult r = probe_gradients(cfg);
    CAPTURE(r.worst_parameter);
    CHECK(r.report.passed);
    CHECK(r.report.max_relative_error < 1e-4);
  }
  GradientProbeConfig strict;
  strict.check.tolerance = 1e-12;
  CHECK_FALSE(probe_gradients(strict).report.passed);
}

TEST_CASE("gfsor episode gradients pass the finite-difference check") {
  const TaneParams p = randomized_params(ModelShape::for_dim(8, 4), 9);
  Rng rng(2);
  const GfsorPair pair = sample_gfsor_pair(data(), data(), TaskPools::training(split()), small_spec(), 5, rng);
  const MemoryBank b = bank();
  const auto [ma, mb] = conjugate_memories(b, pair.task_a.inner.novel_classes,
                                           pair.task_b.inner.novel_classes, false);
  ad::Tape tape;
  const ParamVars vars = bind(tape, p, true);
  const EpisodeLoss loss = episode_loss_gfsor(vars, pair, b, ma.prototypes(), mb.prototypes(), 0.7);
  tape.backward(loss.total);
  const auto grads = gradients(vars);
  TaneParams scratch = p;
  const LossFn fn = [&](std::span<const double> theta) {
    unflatten(theta, scratch);
    return episode_loss_gfsor(pair, b, scratch, 0.7).total;
  };
  const GradCheckReport r = finite_diff_check(fn, flatten(p), grads);
  CAPTURE(parameter_name(p, r.worst_param_index));
  CHECK(r.passed);
  CHECK(loss.breakdown.total == doctest::Approx(episode_loss_gfsor(pair, b, p, 0.7).total).epsilon(1e-13));
}

TEST_CASE("saturated base query has negligible cross-entropy") {
  // A query equal to base prototype b, compared with prototypes orthogonal
  // to it, at temperature 1000.
  const Mat protos = Mat::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  ad::Tape tape;
  const ad::Var q = tape.constant(Mat::from_rows({{0, 2, 0, 0}}));
  const ad::Var logits = cosine_logits(q, tape.constant(protos), tape.constant(Mat(1, 1, std::log(1000.0))));
  const std::vector<std::size_t> label{1};
  CHECK(ad::cross_entropy_mean(logits, label).scalar() < 1e-6);
}

TEST_CASE("update is linear in the loss terms") {
  const TaneParams p = randomized_params(ModelShape::for_dim(8, 4), 4);
  const ConjugatePair pair = pair_for(7);
  const auto g0 = episode_gradients(p, pair, bank(), 0.0).second;
  const auto g1 = episode_gradients(p, pair, bank(), 1.0).second;
  const auto g3 = episode_gradients(p, pair, bank(), 3.0).second;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    CHECK(g3[i] - g0[i] == doctest::Approx(3.0 * (g1[i] - g0[i])).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("zero episodes return the initial parameters") {
  TrainConfig cfg;
  cfg.episodes = 0;
  cfg.seed = 4;
  const TrainResult r = train(data(), split(), cfg);
  CHECK(r.log.empty());
  CHECK(r.params == TaneParams::initialize(ModelShape::for_dim(8), 4));
}

TEST_CASE("training is deterministic") {
  TrainConfig cfg;
  cfg.episodes = 30;
  cfg.n_way = 3;
  cfg.queries_per_class = 5;
  cfg.seed = 9;
  const TrainResult a = train(data(), split(), cfg);
  const TrainResult b = train(data(), split(), cfg);
  CHECK(a.params == b.params);
  CHECK(flatten(a.params) == flatten(b.params));
  REQUIRE(a.log.size() == 30);
  CHECK(a.log[29].loss.total == b.log[29].loss.total);
  cfg.seed = 10;
  CHECK_FALSE(train(data(), split(), cfg).params == a.params);
}

TEST_CASE("training lowers the episode loss") {
  const EmbeddingSet set = generate_synthetic({20, 30, 16, 10.0, 1.0, 5});
  const SplitSpec s{range(0, 12), range(12, 16), range(16, 20)};
  TrainConfig cfg;
  cfg.episodes = 500;
  cfg.seed = 1;
  const TrainResult r = train(set, s, cfg);
  auto window_mean = [&](std::size_t from) {
    double sum = 0.0;
    for (std::size_t e = from; e < from + 50; ++e) sum += r.log[e].loss.total;
    return sum / 50.0;
  };
  CHECK(window_mean(450) < window_mean(0));
}

TEST_CASE("gfsor and baseline objectives train") {
  TrainConfig cfg;
  cfg.episodes = 20;
  cfg.n_way = 3;
  cfg.queries_per_class = 4;
  cfg.mode = TaskMode::Gfsor;
  cfg.gfsor_base_count = 6;
  const TrainResult g = train(data(), split(), cfg);
  CHECK(g.log.size() == 20);
  cfg.mode = TaskMode::Fsor;
  cfg.objective = Objective::NoNegative;
  const TrainResult c = train(data(), split(), cfg);
  CHECK(c.log.back().loss.l_neg == 0.0);
  // Parameters used only by the negative branch never move.
  const TaneParams init = TaneParams::initialize(ModelShape::for_dim(8), cfg.seed);
  CHECK(c.params.envision.key_novel == init.envision.key_novel);
}

TEST_CASE("divergent learning rate reports the episode") {
  TrainConfig cfg;
  cfg.episodes = 200;
  cfg.lr = 1e6;
  try {
    train(data(), split(), cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.has_episode());
    CHECK(e.episode() < 200);
  }
}
