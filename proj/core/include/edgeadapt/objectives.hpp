#pragma once

// Softmax, entropy and the adaptation objectives, each returning the loss
// value together with its gradient with respect to the logits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "edgeadapt/error.hpp"
#include "edgeadapt/tensor.hpp"

namespace edgeadapt {

template <typename Real>
struct SoftmaxEntropy {
  BasicTensor2<Real> probs;
  BasicTensor2<Real> log_probs;
  std::vector<Real> entropy;
};

/// Row-wise softmax with a log-sum-exp shift; entropy = -sum p ln p.
template <typename Real>
SoftmaxEntropy<Real> softmax_entropy(const BasicTensor2<Real>& logits) {
  if (!logits.all_finite()) throw NumericError("softmax_entropy: non-finite logits");
  SoftmaxEntropy<Real> out{BasicTensor2<Real>(logits.rows, logits.cols),
                           BasicTensor2<Real>(logits.rows, logits.cols),
                           std::vector<Real>(logits.rows, Real(0))};
  for (std::size_t i = 0; i < logits.rows; ++i) {
    auto z = logits.row(i);
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (Real v : z) sum += std::exp(v - zmax);
    const Real lse = zmax + std::log(sum);
    Real h = 0;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      const Real lp = z[k] - lse;
      const Real p = std::exp(lp);
      out.log_probs(i, k) = lp;
      out.probs(i, k) = p;
      h -= p * lp;
    }
    out.entropy[i] = std::max(h, Real(0));
  }
  return out;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Real>
std::uint32_t argmax(std::span<const Real> row) {
  std::uint32_t best = 0;
  for (std::uint32_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

template <typename Real>
Real kl_divergence(std::span<const Real> p, std::span<const Real> q) {
  Real kl = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > Real(0)) kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return kl;
}

template <typename Real>
struct LossAndGrad {
  double value = 0.0;
  std::vector<double> per_sample;
  BasicTensor2<Real> dlogits;
};

/// L = (1/N) sum_i weight_i * E_i. Weights are constants.
template <typename Real>
LossAndGrad<Real> weighted_entropy_loss(const BasicTensor2<Real>& logits,
                                        std::span<const Real> weights) {
  if (weights.size() != logits.rows) throw ConfigError("weights/batch size mismatch");
  const auto se = softmax_entropy(logits);
  const std::size_t n = logits.rows;
  LossAndGrad<Real> out{0.0, std::vector<double>(n), BasicTensor2<Real>(n, logits.cols)};
  const Real inv_n = Real(1) / static_cast<Real>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real e = se.entropy[i];
    out.per_sample[i] = static_cast<double>(weights[i] * e);
    out.value += out.per_sample[i];
    // dE/dz_k = -p_k (ln p_k + E)
    for (std::size_t k = 0; k < logits.cols; ++k) {
      out.dlogits(i, k) =
          -weights[i] * inv_n * se.probs(i, k) * (se.log_probs(i, k) + e);
    }
  }
  out.value /= static_cast<double>(n);
  return out;
}

/// Distillation objective for the edge model:
///   L = (1/N) sum_i w_i [ alpha KL(student_i || teacher_i) + beta CE(student_i, label_i) + E_i ]
/// Teacher probabilities, labels and weights are constants.
template <typename Real>
LossAndGrad<Real> distillation_loss(const BasicTensor2<Real>& student_logits,
                                    const BasicTensor2<Real>& teacher_probs,
                                    std::span<const std::uint32_t> labels,
                                    std::span<const Real> weights, Real alpha, Real beta) {
  const std::size_t n = student_logits.rows;
  const std::size_t c = student_logits.cols;
  if (teacher_probs.rows != n || teacher_probs.cols != c || labels.size() != n ||
      weights.size() != n) {
    throw ConfigError("distillation_loss: batch shape mismatch");
  }
  const auto se = softmax_entropy(student_logits);
  LossAndGrad<Real> out{0.0, std::vector<double>(n), BasicTensor2<Real>(n, c)};
  const Real inv_n = Real(1) / static_cast<Real>(n);
  const Real tiny = std::numeric_limits<Real>::min();
  for (std::size_t i = 0; i < n; ++i) {
    const Real e = se.entropy[i];
    Real kl = 0;
    for (std::size_t k = 0; k < c; ++k) {
      kl += se.probs(i, k) * (se.log_probs(i, k) - std::log(std::max(teacher_probs(i, k), tiny)));
    }
    const std::uint32_t y = labels[i];
    const Real ce = -se.log_probs(i, y);
    const Real total = alpha * kl + beta * ce + e;
    out.per_sample[i] = static_cast<double>(weights[i] * total);
    out.value += out.per_sample[i];
    const Real scale = weights[i] * inv_n;
    for (std::size_t k = 0; k < c; ++k) {
      const Real p = se.probs(i, k);
      const Real lp = se.log_probs(i, k);
      const Real lq = std::log(std::max(teacher_probs(i, k), tiny));
      const Real d_kl = p * (lp - lq - kl);
      const Real d_ce = p - (k == y ? Real(1) : Real(0));
      const Real d_ent = -p * (lp + e);
      out.dlogits(i, k) = scale * (alpha * d_kl + beta * d_ce + d_ent);
    }
  }
  out.value /= static_cast<double>(n);
  return out;
}

/// Softmax cross-entropy, mean-reduced, against hard labels smoothed
/// towards the uniform distribution: q = (1 - s) onehot + s / C. Used for
/// pretraining.
template <typename Real>
LossAndGrad<Real> cross_entropy_loss(const BasicTensor2<Real>& logits,
                                     std::span<const std::uint32_t> labels,
                                     Real smoothing = Real(0)) {
  const std::size_t n = logits.rows;
  const std::size_t c = logits.cols;
  if (labels.size() != n) throw ConfigError("cross_entropy_loss: label count mismatch");
  if (!(smoothing >= Real(0) && smoothing < Real(1))) {
    throw ConfigError("label smoothing must lie in [0, 1)");
  }
  const auto se = softmax_entropy(logits);
  LossAndGrad<Real> out{0.0, std::vector<double>(n), BasicTensor2<Real>(n, c)};
  const Real inv_n = Real(1) / static_cast<Real>(n);
  const Real off = smoothing / static_cast<Real>(c);
  for (std::size_t i = 0; i < n; ++i) {
    double li = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const Real q = off + (k == labels[i] ? Real(1) - smoothing : Real(0));
      if (q > Real(0)) li -= static_cast<double>(q * se.log_probs(i, k));
      out.dlogits(i, k) = inv_n * (se.probs(i, k) - q);
    }
    out.per_sample[i] = li;
    out.value += li;
  }
  out.value /= static_cast<double>(n);
  return out;
}

}  // namespace edgeadapt
