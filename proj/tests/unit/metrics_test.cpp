#include <cmath>
#include <random>

#include "doctest.h"
#include "tane/error.hpp"
#include "oracles.hpp"
#include "tane/metrics.hpp"

using namespace tane;
using V = std::vector<double>;
using L = std::vector<std::size_t>;

using namespace tane::oracle;

TEST_CASE("auroc examples") {
  CHECK(auroc(V{0.1, 0.2}, V{0.5, 0.9, 0.3}) == 1.0);
  CHECK(auroc(V{0.3, 0.3}, V{0.3}) == 0.5);
  CHECK(auroc(V{0.9, 0.4}, V{0.5, 0.1}) == 0.25);
  CHECK_THROWS_AS(auroc(V{}, V{1.0}), InsufficientData);
  CHECK_THROWS_AS(auroc(V{1.0}, V{}), InsufficientData);
}

TEST_CASE("auroc equals pairwise enumeration") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t np = 1 + gen() % 40, nn = 1 + gen() % 40;
    // Coarse grid so ties are common.
    std::uniform_int_distribution<int> level(0, trial % 2 ? 5 : 1000);
    V pos(np), neg(nn);
    for (double& x : pos) x = level(gen) / 7.0;
    for (double& x : neg) x = level(gen) / 7.0;
    CHECK(auroc(pos, neg) == pairwise_auroc(pos, neg));
    // Swapping roles reflects the statistic.
    CHECK(auroc(neg, pos) == doctest::Approx(1.0 - auroc(pos, neg)).epsilon(1e-15));
  }
}

TEST_CASE("openness") {
  CHECK(openness(5, 0) == 0.0);
  CHECK(openness(5, 5) == doctest::Approx(0.18350).epsilon(1e-4));
  CHECK(openness(5, 5) == doctest::Approx(1.0 - std::sqrt(10.0 / 15.0)).epsilon(1e-15));
  CHECK(openness(5, 15) > openness(5, 10));
  CHECK_THROWS_AS(openness(0, 3), InvalidInput);
}

TEST_CASE("f-score examples") {
  const L truth{0, 0, 1, 1};
  CHECK(macro_weighted_fscore(truth, truth, 2) == 1.0);
  const L zeros{0, 0, 0, 0};
  CHECK(macro_weighted_fscore(zeros, truth, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(fscores(zeros, truth, 2).macro == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(macro_weighted_fscore(zeros, L{0, 1}, 2), ShapeError);
  CHECK_THROWS_AS(macro_weighted_fscore(L{2}, L{0}, 2), InvalidLabel);
}

TEST_CASE("f-score equals the confusion-matrix oracle") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 2 + gen() % 6, n = 1 + gen() % 60;
    L pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = gen() % classes;
      pred[i] = gen() % 3 == 0 ? truth[i] : gen() % classes;
    }
    CHECK(macro_weighted_fscore(pred, truth, classes) == confusion_fscore(pred, truth, classes));
  }
}

TEST_CASE("harmonic mean") {
  CHECK(harmonic_mean(0.3, 0.3) == doctest::Approx(0.3));
  CHECK(harmonic_mean(0.6, 0.4) == doctest::Approx(0.48));
  CHECK(harmonic_mean(0.7, 0.0) == 0.0);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
}

TEST_CASE("summaries") {
  const MetricSummary one = summarize("x", V{0.4});
  CHECK(one.mean == 0.4);
  CHECK(one.std == 0.0);
  const MetricSummary s = summarize("x", V{1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  AggregateReport r{"fsor", 4, {s}};
  CHECK(r.at("x").mean == 2.5);
  CHECK(r.find("y") == nullptr);
  CHECK_THROWS_AS(r.at("y"), InvalidInput);
}
