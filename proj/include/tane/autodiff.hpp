#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape owns every intermediate value produced while evaluating a loss.
// Ops append a node holding the forward value and, when any input needs a
// gradient, a closure that pushes the node's gradient back to its inputs.
// backward() walks the nodes in reverse creation order, which is a valid
// topological order since nodes only reference earlier ids.
//
// Tapes are single-use and not thread-safe; build one per evaluation.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tane/mat.hpp"

namespace tane::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Mat& value() const;
  const Mat& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1×1 node.
  double scalar() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that accumulates a gradient.
  Var variable(Mat value);
  /// Leaf treated as a constant.
  Var constant(Mat value);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1×1.
  void backward(Var loss);

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of a node; a zero matrix if nothing flowed into it.
  const Mat& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Appends an op node. `backprop` runs only when some input requires grad.
  Var push(Mat value, bool requires_grad, std::function<void(Tape&, std::size_t)> backprop);
  /// Mutable gradient buffer for `id`, allocated as zeros on first use.
  Mat& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    mutable Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> backprop;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
/// Adds a 1×n row to every row of an m×n matrix.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
/// s · a for a 1×1 node s.
Var mul_scalar(Var a, Var s);
Var exp(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
/// Column-wise mean: m×n → 1×n.
Var mean_rows(Var a);
/// Each row divided by its L2 norm. Throws DegenerateVector on a zero row.
Var normalize_rows(Var a);
Var concat_rows(std::span<const Var> parts);
/// Mean over rows of −log softmax(row)[label].
Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels);
/// (1/n) Σᵢ mse(v, mᵢ) for a 1×d row v and n×d matrix m.
Var mean_mse_to_rows(Var v, Var m);

}  // namespace tane::ad
