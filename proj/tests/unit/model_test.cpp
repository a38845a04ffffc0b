#include <fstream>
#include <iterator>

#include "doctest.h"
#include "tane/error.hpp"
#include "tane/evaluation.hpp"
#include "tane/model.hpp"
#include "test_util.hpp"

using namespace tane;

TEST_CASE("shape defaults") {
  const ModelShape s = ModelShape::for_dim(32);
  CHECK(s.d_prime == 16);
  CHECK(s.mapping_hidden == 32);
  CHECK(s.generator_hidden == 8);
  CHECK(ModelShape::for_dim(8, 4).d_prime == 4);
}

TEST_CASE("initialization is seeded") {
  const ModelShape s = ModelShape::for_dim(8, 4);
  CHECK(TaneParams::initialize(s, 1) == TaneParams::initialize(s, 1));
  CHECK_FALSE(TaneParams::initialize(s, 1) == TaneParams::initialize(s, 2));
  const TaneParams p = TaneParams::initialize(s, 1);
  CHECK(p.shape() == s);
  CHECK(p.similarity.temperature() == doctest::Approx(10.0));
  for (double x : p.calibration.residual.values()) CHECK(x == 0.0);
  for (double x : p.envision.mapping.w2.values()) CHECK(x == 0.0);
}

TEST_CASE("flatten and parameter names") {
  const TaneParams p = randomized_params(ModelShape::for_dim(6, 3), 5);
  const auto flat = flatten(p);
  CHECK(flat.size() == parameter_count(p));
  // K_N, K_B, K_R, K'_N, K'_B, g (8+8+8+1), h (6*6+6+6*6+6), log tau
  CHECK(flat.size() == 18 + 18 + 36 + 18 + 18 + 25 + 84 + 1);
  TaneParams q = TaneParams::initialize(ModelShape::for_dim(6, 3), 0);
  unflatten(flat, q);
  CHECK(q == p);
  CHECK(parameter_name(p, 0) == "calibration.key_novel[0]");
  CHECK(parameter_name(p, 18) == "calibration.key_memory[0]");
  CHECK(parameter_name(p, flat.size() - 1) == "similarity.log_temperature[0]");
  CHECK_THROWS_AS(unflatten(std::vector<double>(3), q), ShapeError);
}

TEST_CASE("checkpoint round trip and corruption") {
  test::TempDir dir("ckpt");
  const TaneParams p = randomized_params(ModelShape::for_dim(8, 4), 3);
  save_checkpoint(p, dir / "a.ckpt");
  CHECK(load_checkpoint(dir / "a.ckpt") == p);

  std::ifstream in(dir / "a.ckpt", std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  {
    std::ofstream out(dir / "short.ckpt", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), FormatError);
  {
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out << "XXXX" << bytes.substr(4);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), FormatError);
}

TEST_CASE("checkpoint of another dimension fails at use") {
  const TaneParams p = TaneParams::initialize(ModelShape::for_dim(16), 0);
  const EmbeddingSet set = generate_synthetic({12, 20, 32, 5.0, 1.0, 1});
  const SplitSpec split{{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}};
  TaskSpec spec;
  spec.n_way = 3;
  spec.queries_per_class = 5;
  EvalOptions opt;
  opt.num_tasks = 2;
  CHECK_THROWS_AS(evaluate_fsor(p, set, split, compute_memory_bank(set, split.base_classes), spec, opt),
                  ShapeError);
}
