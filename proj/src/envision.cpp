#include "tane/envision.hpp"

#include <cmath>
#include <string>

#include "tane/error.hpp"

namespace tane {

void Mlp::validate() const {
  if (w1.rows() == 0 || w1.cols() == 0) throw ShapeError("MLP with empty first layer");
  if (b1.rows() != 1 || b1.cols() != w1.cols()) throw ShapeError("MLP b1 shape");
  if (w2.rows() != w1.cols() || w2.cols() == 0) throw ShapeError("MLP w2 shape");
  if (b2.rows() != 1 || b2.cols() != w2.cols()) throw ShapeError("MLP b2 shape");
  if (!w1.all_finite() || !b1.all_finite() || !w2.all_finite() || !b2.all_finite()) {
    throw NumericalError("non-finite MLP weight");
  }
}

ad::Var apply(const MlpVars& mlp, ad::Var x) {
  auto hidden = ad::relu(ad::add_row(ad::matmul(x, mlp.w1), mlp.b1));
  return ad::add_row(ad::matmul(hidden, mlp.w2), mlp.b2);
}

void EnvisionParams::validate() const {
  const std::size_t d = key_novel.rows();
  if (d == 0 || key_novel.cols() == 0) throw ShapeError("empty envision projection");
  if (key_memory.rows() != d || key_memory.cols() != key_novel.cols()) {
    throw ShapeError("K′_B shape does not match K′_N");
  }
  generator.validate();
  mapping.validate();
  if (generator.in() != 1 || generator.out() != 1) throw ShapeError("generator must map 1→1");
  if (mapping.in() != d || mapping.out() != d) throw ShapeError("mapping must map d→d");
  if (!key_novel.all_finite() || !key_memory.all_finite()) {
    throw NumericalError("non-finite envision projection");
  }
}

EnvisionParams init_envision(std::size_t dim, std::size_t d_prime, std::size_t generator_hidden,
                             std::size_t mapping_hidden, Rng& rng) {
  if (dim == 0 || d_prime == 0 || mapping_hidden == 0) {
    throw InvalidConfig("envision dims must be positive");
  }
  if (generator_hidden < 2) throw InvalidConfig("generator needs at least 2 hidden units");
  EnvisionParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  p.key_novel = Mat(dim, d_prime);
  p.key_memory = Mat(dim, d_prime);
  for (double& x : p.key_novel.values()) x = rng.uniform(-bound, bound);
  for (double& x : p.key_memory.values()) x = rng.uniform(-bound, bound);

  p.generator = Mlp{Mat(1, generator_hidden), Mat(1, generator_hidden), Mat(generator_hidden, 1),
                    Mat(1, 1)};
  p.generator.w1(0, 0) = 1.0;
  p.generator.w1(0, 1) = -1.0;
  for (std::size_t j = 2; j < generator_hidden; ++j) p.generator.w1(0, j) = rng.uniform(-1.0, 1.0);
  p.generator.w2(0, 0) = 1.0;
  p.generator.w2(1, 0) = -1.0;

  p.mapping = Mlp{Mat(dim, mapping_hidden), Mat(1, mapping_hidden), Mat(mapping_hidden, dim),
                  Mat(1, dim)};
  for (double& x : p.mapping.w1.values()) x = rng.uniform(-bound, bound);
  return p;
}

namespace {

MlpVars bind_mlp(ad::Tape& tape, const Mlp& mlp, bool trainable) {
  auto leaf = [&](const Mat& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  return MlpVars{leaf(mlp.w1), leaf(mlp.b1), leaf(mlp.w2), leaf(mlp.b2)};
}

}  // namespace

EnvisionVars bind(ad::Tape& tape, const EnvisionParams& params, bool trainable) {
  params.validate();
  auto leaf = [&](const Mat& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  EnvisionVars v{leaf(params.key_novel), leaf(params.key_memory), {}, {}};
  v.generator = bind_mlp(tape, params.generator, trainable);
  v.mapping = bind_mlp(tape, params.mapping, trainable);
  return v;
}

ad::Var negative_relation(ad::Var novel, ad::Var memory, const EnvisionVars& params) {
  const std::size_t d = params.key_novel.rows();
  if (memory.rows() == 0) throw EmptyMemory("negative relation against empty memory");
  if (novel.rows() == 0) throw ShapeError("no novel prototypes");
  if (novel.cols() != d || memory.cols() != d) throw ShapeError("envision dim mismatch");
  auto query = ad::matmul(novel, params.key_novel);
  auto keys = ad::matmul(memory, params.key_memory);
  const double s = 1.0 / std::sqrt(static_cast<double>(params.key_novel.cols()));
  return ad::scale(ad::matmul_nt(query, keys), s);
}

ad::Var generate_negative_relation(ad::Var w_n, const EnvisionVars& params) {
  if (w_n.rows() == 0) throw ShapeError("relation matrix with no rows");
  auto pooled = ad::transpose(ad::mean_rows(w_n));  // B×1, one scalar feature per slot
  return ad::transpose(apply(params.generator, pooled));
}

ad::Var envision_negative(ad::Var w_neg, ad::Var memory, const EnvisionVars& params) {
  if (memory.rows() == 0) throw EmptyMemory("envision against empty memory");
  if (w_neg.rows() != 1 || w_neg.cols() != memory.rows()) {
    throw ShapeError("W_neg length " + std::to_string(w_neg.cols()) + " != memory size " +
                     std::to_string(memory.rows()));
  }
  auto aggregate = ad::matmul(ad::softmax_rows(w_neg), memory);
  return ad::add(aggregate, apply(params.mapping, aggregate));
}

Mat negative_relation(const Mat& novel, const Mat& memory, const EnvisionParams& params) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  return negative_relation(tape.constant(novel), tape.constant(memory), vars).value();
}

std::vector<double> generate_negative_relation(const Mat& w_n, const EnvisionParams& params) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  const auto v = generate_negative_relation(tape.constant(w_n), vars).value().values();
  return {v.begin(), v.end()};
}

std::vector<double> envision_negative(std::span<const double> w_neg, const Mat& memory,
                                      const EnvisionParams& params) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  const auto v =
      envision_negative(tape.constant(Mat::row_vector(w_neg)), tape.constant(memory), vars)
          .value()
          .values();
  return {v.begin(), v.end()};
}

std::size_t OpenSetPrototypes::size() const { return novel_offset() + novel.rows() + 1; }

Mat OpenSetPrototypes::stacked() const {
  std::vector<Mat> blocks;
  if (base) blocks.push_back(*base);
  blocks.push_back(novel);
  blocks.push_back(Mat::row_vector(negative));
  return vstack(blocks);
}

OpenSetPrototypes build_open_set(const Mat& novel, std::span<const double> p_neg,
                                 const std::optional<Mat>& base) {
  if (p_neg.size() != novel.cols()) throw ShapeError("negative prototype dim mismatch");
  if (base && base->cols() != novel.cols()) throw ShapeError("base prototype dim mismatch");
  return OpenSetPrototypes{novel, std::vector<double>(p_neg.begin(), p_neg.end()), base};
}

}  // namespace tane
