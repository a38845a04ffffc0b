#include "tane/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tane/error.hpp"

namespace tane::ad {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw InvalidInput("unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw InvalidInput("Vars from different tapes");
  return tape_of(a);
}

bool needs(Var v) { return v.tape->requires_grad(v.id); }

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* op) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(op) + ": got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on non-1x1 node");
  return v(0, 0);
}

Var Tape::variable(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat{}, true, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat{}, false, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Mat value, bool requires_grad,
               std::function<void(Tape&, std::size_t)> backprop) {
  if (!value.all_finite()) throw NumericalError("non-finite value in forward pass");
  nodes_.push_back(
      Node{std::move(value), Mat{}, requires_grad, requires_grad ? std::move(backprop) : nullptr});
  return Var{this, nodes_.size() - 1};
}

Mat& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Mat(n.value.rows(), n.value.cols());
  return n.grad;
}

const Mat& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Mat(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InvalidInput("backward on foreign Var");
  require_shape(value(loss.id), 1, 1, "backward");
  for (auto& n : nodes_) n.grad = Mat{};
  grad_buffer(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backprop && !n.grad.empty()) n.backprop(*this, i);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.push(tane::matmul(a.value(), b.value()), needs(a) || needs(b),
                [a, b](Tape& tp, std::size_t self) {
                  const Mat& g = tp.grad(self);
                  if (tp.requires_grad(a.id)) add_inplace(tp.grad_buffer(a.id), matmul_nt(g, b.value()));
                  if (tp.requires_grad(b.id)) add_inplace(tp.grad_buffer(b.id), matmul_tn(a.value(), g));
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.push(tane::matmul_nt(a.value(), b.value()), needs(a) || needs(b),
                [a, b](Tape& tp, std::size_t self) {
                  const Mat& g = tp.grad(self);
                  if (tp.requires_grad(a.id)) add_inplace(tp.grad_buffer(a.id), tane::matmul(g, b.value()));
                  if (tp.requires_grad(b.id)) add_inplace(tp.grad_buffer(b.id), matmul_tn(g, a.value()));
                });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.push(tane::transpose(a.value()), needs(a), [a](Tape& tp, std::size_t self) {
    add_inplace(tp.grad_buffer(a.id), tane::transpose(tp.grad(self)));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Mat out = a.value();
  add_inplace(out, b.value());
  return t.push(std::move(out), needs(a) || needs(b), [a, b](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a.id)) add_inplace(tp.grad_buffer(a.id), g);
    if (tp.requires_grad(b.id)) add_inplace(tp.grad_buffer(b.id), g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Mat& av = a.value();
  require_shape(row.value(), 1, av.cols(), "add_row");
  Mat out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] += row.value()(0, j);
  }
  return t.push(std::move(out), needs(a) || needs(row), [a, row](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a.id)) add_inplace(tp.grad_buffer(a.id), g);
    if (tp.requires_grad(row.id)) {
      Mat& gr = tp.grad_buffer(row.id);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Mat out = a.value();
  for (double& x : out.values()) x *= s;
  return t.push(std::move(out), needs(a), [a, s](Tape& tp, std::size_t self) {
    add_scaled_inplace(tp.grad_buffer(a.id), tp.grad(self), s);
  });
}

Var mul_scalar(Var a, Var s) {
  Tape& t = tape_of(a, s);
  const double sv = s.scalar();
  Mat out = a.value();
  for (double& x : out.values()) x *= sv;
  return t.push(std::move(out), needs(a) || needs(s), [a, s](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a.id)) add_scaled_inplace(tp.grad_buffer(a.id), g, s.scalar());
    if (tp.requires_grad(s.id)) {
      double acc = 0.0;
      auto gv = g.values();
      auto av = a.value().values();
      for (std::size_t i = 0; i < gv.size(); ++i) acc += gv[i] * av[i];
      tp.grad_buffer(s.id)(0, 0) += acc;
    }
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.value();
  for (double& x : out.values()) x = std::exp(x);
  return t.push(std::move(out), needs(a), [a](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& y = tp.value(self);
    Mat& ga = tp.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.values()[i] += g.values()[i] * y.values()[i];
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return t.push(std::move(out), needs(a), [a](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const auto x = a.value().values();
    Mat& ga = tp.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (x[i] > 0.0) ga.values()[i] += g.values()[i];
    }
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Mat& av = a.value();
  if (av.cols() == 0) throw InvalidInput("softmax over empty rows");
  Mat out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto in = av.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& x : o) x /= sum;
  }
  return t.push(std::move(out), needs(a), [a](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& y = tp.value(self);
    Mat& ga = tp.grad_buffer(a.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) inner += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - inner);
    }
  });
}

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const Mat& av = a.value();
  if (av.rows() == 0) throw InvalidInput("mean over zero rows");
  Mat out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j);
  }
  const double inv = 1.0 / static_cast<double>(av.rows());
  for (double& x : out.values()) x *= inv;
  return t.push(std::move(out), needs(a), [a, inv](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    Mat& ga = tp.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
    }
  });
}

Var normalize_rows(Var a) {
  Tape& t = tape_of(a);
  const Mat& av = a.value();
  Mat out(av.rows(), av.cols());
  std::vector<double> norms(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (double x : av.row(i)) s += x * x;
    const double n = std::sqrt(s);
    if (!(n > 0.0)) throw DegenerateVector("zero-norm row " + std::to_string(i));
    norms[i] = n;
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) / n;
  }
  return t.push(std::move(out), needs(a),
                [a, norms = std::move(norms)](Tape& tp, std::size_t self) {
                  const Mat& g = tp.grad(self);
                  const Mat& y = tp.value(self);
                  Mat& ga = tp.grad_buffer(a.id);
                  for (std::size_t i = 0; i < y.rows(); ++i) {
                    double inner = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j) inner += g(i, j) * y(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j) {
                      ga(i, j) += (g(i, j) - y(i, j) * inner) / norms[i];
                    }
                  }
                });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_rows of nothing");
  Tape& t = tape_of(parts.front());
  std::vector<Mat> blocks;
  blocks.reserve(parts.size());
  bool any = false;
  for (const Var& p : parts) {
    if (p.tape != &t) throw InvalidInput("Vars from different tapes");
    blocks.push_back(p.value());
    any = any || needs(p);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(vstack(blocks), any, [inputs = std::move(inputs)](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t r = p.value().rows();
      if (tp.requires_grad(p.id)) {
        Mat& gp = tp.grad_buffer(p.id);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(offset + i, j);
        }
      }
      offset += r;
    }
  });
}

Var cross_entropy_mean(Var logits, std::span<const std::size_t> labels) {
  Tape& t = tape_of(logits);
  const Mat& z = logits.value();
  if (labels.size() != z.rows()) throw ShapeError("cross_entropy_mean: label count mismatch");
  if (z.rows() == 0) throw InvalidInput("cross_entropy_mean over zero rows");
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (labels[i] >= z.cols()) {
      throw InvalidLabel("label " + std::to_string(labels[i]) + " with " +
                         std::to_string(z.cols()) + " classes");
    }
    auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      probs(i, j) = std::exp(row[j] - mx);
      sum += probs(i, j);
    }
    for (std::size_t j = 0; j < row.size(); ++j) probs(i, j) /= sum;
    total += mx + std::log(sum) - row[labels[i]];
  }
  const double inv = 1.0 / static_cast<double>(z.rows());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return t.push(Mat(1, 1, total * inv), needs(logits),
                [logits, inv, probs = std::move(probs), lab = std::move(lab)](Tape& tp,
                                                                              std::size_t self) {
                  const double g = tp.grad(self)(0, 0) * inv;
                  Mat& gz = tp.grad_buffer(logits.id);
                  for (std::size_t i = 0; i < probs.rows(); ++i) {
                    for (std::size_t j = 0; j < probs.cols(); ++j) {
                      gz(i, j) += g * (probs(i, j) - (j == lab[i] ? 1.0 : 0.0));
                    }
                  }
                });
}

Var mean_mse_to_rows(Var v, Var m) {
  Tape& t = tape_of(v, m);
  const Mat& vv = v.value();
  const Mat& mv = m.value();
  require_shape(vv, 1, mv.cols(), "mean_mse_to_rows");
  if (mv.rows() == 0 || mv.cols() == 0) throw InvalidInput("mean_mse_to_rows over empty matrix");
  const double inv = 1.0 / static_cast<double>(mv.rows() * mv.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < mv.rows(); ++i) {
    for (std::size_t j = 0; j < mv.cols(); ++j) {
      const double d = vv(0, j) - mv(i, j);
      acc += d * d;
    }
  }
  return t.push(Mat(1, 1, acc * inv), needs(v) || needs(m), [v, m, inv](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0) * 2.0 * inv;
    const Mat& vv = v.value();
    const Mat& mv = m.value();
    const bool gv = tp.requires_grad(v.id);
    const bool gm = tp.requires_grad(m.id);
    for (std::size_t i = 0; i < mv.rows(); ++i) {
      for (std::size_t j = 0; j < mv.cols(); ++j) {
        const double d = g * (vv(0, j) - mv(i, j));
        if (gv) tp.grad_buffer(v.id)(0, j) += d;
        if (gm) tp.grad_buffer(m.id)(i, j) -= d;
      }
    }
  });
}

}  // namespace tane::ad
