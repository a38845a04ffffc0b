#include "tane/calibration.hpp"

#include <cmath>
#include <string>

#include "tane/error.hpp"

namespace tane {

namespace {

void fill_uniform(Mat& m, double bound, Rng& rng) {
  for (double& x : m.values()) x = rng.uniform(-bound, bound);
}

void check_memory(const Mat& memory, std::size_t dim) {
  if (memory.rows() == 0) throw EmptyMemory("calibration against empty memory");
  if (memory.cols() != dim) {
    throw ShapeError("memory dim " + std::to_string(memory.cols()) + " != parameter dim " +
                     std::to_string(dim));
  }
}

}  // namespace

void CalibrationParams::validate() const {
  const std::size_t d = key_novel.rows();
  if (d == 0 || key_novel.cols() == 0) throw ShapeError("empty calibration projection");
  if (key_memory.rows() != d || key_memory.cols() != key_novel.cols()) {
    throw ShapeError("K_B shape does not match K_N");
  }
  if (residual.rows() != d || residual.cols() != d) throw ShapeError("K_R must be d×d");
  if (!key_novel.all_finite() || !key_memory.all_finite() || !residual.all_finite()) {
    throw NumericalError("non-finite calibration parameter");
  }
}

CalibrationParams init_calibration(std::size_t dim, std::size_t d_prime, Rng& rng) {
  if (dim == 0 || d_prime == 0) throw InvalidConfig("calibration dims must be positive");
  CalibrationParams p{Mat(dim, d_prime), Mat(dim, d_prime), Mat(dim, dim)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  fill_uniform(p.key_novel, bound, rng);
  fill_uniform(p.key_memory, bound, rng);
  return p;
}

CalibrationVars bind(ad::Tape& tape, const CalibrationParams& params, bool trainable) {
  params.validate();
  auto leaf = [&](const Mat& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  return CalibrationVars{leaf(params.key_novel), leaf(params.key_memory), leaf(params.residual)};
}

Mat naive_prototypes(const Mat& support, std::size_t k_shot) {
  if (k_shot == 0) throw InsufficientData("k_shot = 0");
  if (support.rows() == 0 || support.rows() % k_shot != 0) {
    throw ShapeError("support rows " + std::to_string(support.rows()) +
                     " not a positive multiple of K=" + std::to_string(k_shot));
  }
  const std::size_t n = support.rows() / k_shot;
  Mat out(n, support.cols());
  const double inv = 1.0 / static_cast<double>(k_shot);
  for (std::size_t c = 0; c < n; ++c) {
    auto dst = out.row(c);
    for (std::size_t i = 0; i < k_shot; ++i) {
      auto src = support.row(c * k_shot + i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    for (double& x : dst) x *= inv;
  }
  return out;
}

ad::Var relation_scores(ad::Var naive, ad::Var memory, const CalibrationVars& params) {
  const std::size_t d_prime = params.key_novel.cols();
  check_memory(memory.value(), params.key_novel.rows());
  auto query = ad::matmul(naive, params.key_novel);
  auto keys = ad::matmul(memory, params.key_memory);
  return ad::scale(ad::matmul_nt(query, keys), 1.0 / std::sqrt(static_cast<double>(d_prime)));
}

ad::Var calibrate(ad::Var naive, ad::Var memory, const CalibrationVars& params) {
  auto weights = ad::softmax_rows(relation_scores(naive, memory, params));
  auto aggregate = ad::matmul(ad::matmul(weights, memory), params.residual);
  return ad::add(naive, aggregate);
}

std::vector<double> relation_scores(std::span<const double> p_prime, const Mat& memory,
                                    const CalibrationParams& params) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  if (p_prime.size() != params.dim()) throw ShapeError("prototype dim mismatch");
  auto scores = relation_scores(tape.constant(Mat::row_vector(p_prime)), tape.constant(memory), vars);
  const auto v = scores.value().values();
  return {v.begin(), v.end()};
}

Mat calibrate(const Mat& naive, const Mat& memory, const CalibrationParams& params) {
  ad::Tape tape;
  auto vars = bind(tape, params, false);
  if (naive.cols() != params.dim()) throw ShapeError("prototype dim mismatch");
  return calibrate(tape.constant(naive), tape.constant(memory), vars).value();
}

}  // namespace tane
