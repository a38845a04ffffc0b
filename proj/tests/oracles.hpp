#pragma once

// Straight-loop reference implementations used as test oracles. They share
// no code with the library beyond Mat and the parameter structs.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tane/calibration.hpp"
#include "tane/envision.hpp"
#include "tane/mat.hpp"
#include "tane/rng.hpp"
#include "test_util.hpp"

namespace tane::oracle {

using V = std::vector<double>;
using L = std::vector<std::size_t>;

inline double pairwise_auroc(const V& pos, const V& neg) {
  std::size_t twice = 0;
  for (double p : pos) {
    for (double n : neg) twice += n > p ? 2 : (n == p ? 1 : 0);
  }
  return double(twice) / (2.0 * double(pos.size()) * double(neg.size()));
}

/// Confusion-matrix oracle, classes visited in ascending order.
inline double confusion_fscore(const L& pred, const L& truth, std::size_t c_count) {
  std::vector<std::vector<std::size_t>> cm(c_count, std::vector<std::size_t>(c_count, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm[truth[i]][pred[i]];
  double weighted = 0.0, total = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t k = 0; k < c_count; ++k) {
      support += cm[c][k];
      predicted += cm[k][c];
    }
    if (support == 0) continue;
    const std::size_t tp = cm[c][c];
    const double f1 = 2.0 * double(tp) / double(2 * tp + (predicted - tp) + (support - tp));
    weighted += double(support) * f1;
    total += double(support);
  }
  return total == 0.0 ? 0.0 : weighted / total;
}

inline V project(std::span<const double> x, const Mat& k) {
  V out(k.cols(), 0.0);
  for (std::size_t j = 0; j < k.cols(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) out[j] += x[i] * k(i, j);
  }
  return out;
}

inline double bilinear(std::span<const double> a, const Mat& ka, std::span<const double> b, const Mat& kb) {
  const V pa = project(a, ka), pb = project(b, kb);
  double s = 0.0;
  for (std::size_t j = 0; j < pa.size(); ++j) s += pa[j] * pb[j];
  return s / std::sqrt(double(ka.cols()));
}

inline V oracle_calibrate_row(std::span<const double> p, const Mat& memory, const CalibrationParams& c) {
  V r(memory.rows());
  for (std::size_t b = 0; b < memory.rows(); ++b) r[b] = bilinear(p, c.key_novel, memory.row(b), c.key_memory);
  double mx = r[0];
  for (double x : r) mx = std::max(mx, x);
  double z = 0.0;
  for (double& x : r) z += (x = std::exp(x - mx));
  V agg(p.size(), 0.0);
  for (std::size_t b = 0; b < memory.rows(); ++b) {
    for (std::size_t j = 0; j < p.size(); ++j) agg[j] += r[b] / z * memory(b, j);
  }
  V out(p.begin(), p.end());
  const V res = project(agg, c.residual);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += res[j];
  return out;
}

inline double oracle_mlp_scalar(double x, const Mlp& m) {
  double y = m.b2(0, 0);
  for (std::size_t h = 0; h < m.hidden(); ++h) {
    y += std::max(0.0, x * m.w1(0, h) + m.b1(0, h)) * m.w2(h, 0);
  }
  return y;
}

inline V oracle_mlp(std::span<const double> x, const Mlp& m) {
  V hidden(m.hidden());
  for (std::size_t h = 0; h < m.hidden(); ++h) {
    double s = m.b1(0, h);
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * m.w1(i, h);
    hidden[h] = std::max(0.0, s);
  }
  V y(m.out());
  for (std::size_t o = 0; o < m.out(); ++o) {
    double s = m.b2(0, o);
    for (std::size_t h = 0; h < m.hidden(); ++h) s += hidden[h] * m.w2(h, o);
    y[o] = s;
  }
  return y;
}

inline V oracle_negative(const Mat& novel, const Mat& memory, const EnvisionParams& e) {
  const std::size_t n = novel.rows(), b_count = memory.rows(), d = memory.cols();
  V w_neg(b_count, 0.0);
  for (std::size_t b = 0; b < b_count; ++b) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += bilinear(novel.row(i), e.key_novel, memory.row(b), e.key_memory);
    w_neg[b] = oracle_mlp_scalar(mean / double(n), e.generator);
  }
  V a_w = w_neg;
  const double mx = *std::max_element(a_w.begin(), a_w.end());
  double z = 0.0;
  for (double& x : a_w) z += (x = std::exp(x - mx));
  for (double& x : a_w) x /= z;
  V a(d, 0.0);
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t j = 0; j < d; ++j) a[j] += a_w[b] * memory(b, j);
  }
  const V h = oracle_mlp(a, e.mapping);
  for (std::size_t j = 0; j < d; ++j) a[j] += h[j];
  return a;
}

/// Parameters with every entry random, so no branch is trivially inactive.
inline CalibrationParams random_calibration(std::size_t d, std::size_t dp, std::uint64_t seed) {
  return {test::random_mat(d, dp, seed), test::random_mat(d, dp, seed + 1),
          test::random_mat(d, d, seed + 2, 0.3)};
}

inline EnvisionParams random_envision(std::size_t d, std::size_t dp, std::uint64_t seed) {
  Rng rng(seed);
  EnvisionParams p = init_envision(d, dp, 8, d, rng);
  for (Mat* m : {&p.key_novel, &p.key_memory, &p.generator.w1, &p.generator.b1, &p.generator.w2,
                 &p.generator.b2, &p.mapping.w1, &p.mapping.b1, &p.mapping.w2, &p.mapping.b2}) {
    *m = test::random_mat(m->rows(), m->cols(), seed++ * 31 + 7, 0.5);
  }
  return p;
}

}  // namespace tane::oracle
