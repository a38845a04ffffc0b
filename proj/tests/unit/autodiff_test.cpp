#include <functional>

#include "doctest.h"
#include "tane/autodiff.hpp"
#include "tane/error.hpp"
#include "tane/numeric.hpp"
#include "test_util.hpp"

using namespace tane;

namespace {

using Op = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Reduces any output to a scalar with fixed random linear weights, so every
/// output entry contributes a distinct coefficient to the gradient.
ad::Var reduce(ad::Tape& tape, ad::Var out, std::uint64_t seed) {
  const ad::Var w = tape.constant(test::random_mat(out.cols(), 1, seed));
  const ad::Var ones = tape.constant(Mat(1, out.rows(), 1.0));
  return ad::matmul(ones, ad::matmul(out, w));
}

/// Compares tape gradients of all inputs against central differences.
GradCheckReport check_op(const Op& op, const std::vector<Mat>& inputs) {
  auto eval = [&](const std::vector<Mat>& xs, std::vector<double>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& x : xs) vars.push_back(tape.variable(x));
    const ad::Var loss = reduce(tape, op(tape, vars), 99);
    if (grads) {
      tape.backward(loss);
      for (const auto& v : vars) {
        grads->insert(grads->end(), v.grad().values().begin(), v.grad().values().end());
      }
    }
    return loss.scalar();
  };
  std::vector<double> flat, grads;
  for (const auto& x : inputs) flat.insert(flat.end(), x.values().begin(), x.values().end());
  eval(inputs, &grads);
  const LossFn fn = [&](std::span<const double> theta) {
    std::vector<Mat> xs = inputs;
    std::size_t k = 0;
    for (auto& x : xs) {
      for (double& v : x.values()) v = theta[k++];
    }
    return eval(xs, nullptr);
  };
  return finite_diff_check(fn, flat, grads);
}

}  // namespace

TEST_CASE("every op's gradient matches finite differences") {
  const Mat a = test::random_mat(3, 4, 1);
  const Mat b = test::random_mat(4, 2, 2);
  const Mat c = test::random_mat(5, 4, 3);
  const Mat row = test::random_mat(1, 4, 4);
  const Mat s = test::random_mat(1, 1, 5);

  struct Case {
    const char* name;
    Op op;
    std::vector<Mat> inputs;
  };
  const std::vector<Case> cases = {
      {"matmul", [](auto&, const auto& v) { return ad::matmul(v[0], v[1]); }, {a, b}},
      {"matmul_nt", [](auto&, const auto& v) { return ad::matmul_nt(v[0], v[1]); }, {a, c}},
      {"transpose", [](auto&, const auto& v) { return ad::transpose(v[0]); }, {a}},
      {"add", [](auto&, const auto& v) { return ad::add(v[0], v[1]); }, {a, test::random_mat(3, 4, 6)}},
      {"add_row", [](auto&, const auto& v) { return ad::add_row(v[0], v[1]); }, {a, row}},
      {"scale", [](auto&, const auto& v) { return ad::scale(v[0], -1.7); }, {a}},
      {"mul_scalar", [](auto&, const auto& v) { return ad::mul_scalar(v[0], v[1]); }, {a, s}},
      {"exp", [](auto&, const auto& v) { return ad::exp(v[0]); }, {a}},
      {"relu", [](auto&, const auto& v) { return ad::relu(v[0]); }, {a}},
      {"softmax_rows", [](auto&, const auto& v) { return ad::softmax_rows(v[0]); }, {a}},
      {"mean_rows", [](auto&, const auto& v) { return ad::mean_rows(v[0]); }, {c}},
      {"normalize_rows", [](auto&, const auto& v) { return ad::normalize_rows(v[0]); }, {a}},
      {"concat_rows",
       [](auto&, const auto& v) {
         const std::vector<ad::Var> parts{v[0], v[1], v[0]};
         return ad::concat_rows(parts);
       },
       {a, row}},
      {"cross_entropy_mean",
       [](auto&, const auto& v) {
         const std::vector<std::size_t> labels{0, 3, 2};
         return ad::cross_entropy_mean(v[0], labels);
       },
       {a}},
      {"mean_mse_to_rows", [](auto&, const auto& v) { return ad::mean_mse_to_rows(v[0], v[1]); }, {row, c}},
  };
  for (const auto& tc : cases) {
    CAPTURE(tc.name);
    const GradCheckReport r = check_op(tc.op, tc.inputs);
    CHECK(r.passed);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("forward values") {
  ad::Tape tape;
  const ad::Var x = tape.constant(Mat::from_rows({{1.0, 2.0}, {3.0, 5.0}}));
  CHECK(ad::mean_rows(x).value() == Mat::from_rows({{2.0, 3.5}}));
  const ad::Var n = ad::normalize_rows(x);
  CHECK(n.value()(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
  const std::vector<std::size_t> labels{1, 0};
  const ad::Var ce = ad::cross_entropy_mean(x, labels);
  const double expected =
      0.5 * (cross_entropy(std::vector<double>{1.0, 2.0}, 1) +
             cross_entropy(std::vector<double>{3.0, 5.0}, 0));
  CHECK(ce.scalar() == doctest::Approx(expected).epsilon(1e-14));
  const ad::Var v = tape.constant(Mat::from_rows({{1.0, 0.0}}));
  CHECK(ad::mean_mse_to_rows(v, x).scalar() ==
        doctest::Approx(0.5 * ((0.0 + 4.0) / 2.0 + (4.0 + 25.0) / 2.0)));
}

TEST_CASE("errors") {
  ad::Tape tape;
  const ad::Var a = tape.variable(Mat(2, 3, 1.0));
  CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
  CHECK_THROWS_AS(ad::normalize_rows(tape.constant(Mat(1, 3, 0.0))), DegenerateVector);
  const std::vector<std::size_t> labels{0, 3};
  CHECK_THROWS_AS(ad::cross_entropy_mean(a, labels), InvalidLabel);
  CHECK_THROWS_AS(ad::exp(tape.constant(Mat(1, 1, 1000.0))), NumericalError);
}

TEST_CASE("constants receive no gradient and shared nodes accumulate") {
  ad::Tape tape;
  const ad::Var x = tape.variable(Mat::from_rows({{2.0}}));
  const ad::Var k = tape.constant(Mat::from_rows({{3.0}}));
  const ad::Var y = ad::add(ad::matmul(x, k), ad::matmul(x, x));
  tape.backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(3.0 + 4.0));
  CHECK_FALSE(tape.requires_grad(k.id));
}
