#pragma once

#include <cmath>
#include <memory>

#include "monomm/ops.hpp"
#include "monomm/tensor.hpp"

namespace monomm {

// Binary focal term on logit z with hard target t in {0,1}:
//   FL = -alpha * (1 - p_t)^gamma * ln(p_t),  p_t = t*p + (1-t)*(1-p)
// With gamma = 0, alpha = 1 this is exactly binary cross-entropy.
// Computed via softplus so large |z| never overflows.
template <typename T>
inline T binary_focal_scalar(T z, int target, T alpha, T gamma) {
  T zs = target ? z : -z;
  T q = sigmoid_scalar(-zs);        // 1 - p_t
  T nll = softplus_scalar(-zs);     // -ln(p_t)
  T mod = gamma == T(0) ? T(1) : std::pow(q, gamma);
  return alpha * mod * nll;
}

template <typename T>
inline T binary_focal_grad_scalar(T z, int target, T alpha, T gamma) {
  T zs = target ? z : -z;
  T q = sigmoid_scalar(-zs);  // 1 - p_t
  T p = T(1) - q;             // p_t
  T mod = gamma == T(0) ? T(1) : std::pow(q, gamma);
  T d = -alpha * mod * (gamma * p * softplus_scalar(-zs) + q);
  return target ? d : -d;
}

// Weighted sum of per-element binary focal terms. targets holds 0/1,
// weight 0 drops an element entirely (its logit gets no gradient).
template <typename T>
Tensor<T> masked_binary_focal(const Tensor<T>& logits,
                              const std::vector<uint8_t>& targets,
                              const std::vector<T>& weights, T alpha,
                              T gamma) {
  check(int64_t(targets.size()) == logits.numel() &&
            int64_t(weights.size()) == logits.numel(),
        "masked_binary_focal: target/weight length mismatch");
  Tensor<T> out = make_output<T>({1});
  const T* z = logits.data();
  T acc = 0;
  for (int64_t i = 0, n = logits.numel(); i < n; ++i)
    if (weights[size_t(i)] != T(0))
      acc += weights[size_t(i)] *
             binary_focal_scalar(z[i], targets[size_t(i)], alpha, gamma);
  out.data()[0] = acc;
  if (track_grad<T>({&logits})) {
    auto ln = logits.node();
    auto tg = std::make_shared<std::vector<uint8_t>>(targets);
    auto wt = std::make_shared<std::vector<T>>(weights);
    attach<T>(out, {logits}, [ln, tg, wt, alpha, gamma](Node<T>& o) {
      ln->ensure_grad();
      T g = o.grad[0];
      for (size_t i = 0; i < ln->data.size(); ++i)
        if ((*wt)[i] != T(0))
          ln->grad[i] += g * (*wt)[i] *
                         binary_focal_grad_scalar(ln->data[i], (*tg)[i],
                                                  alpha, gamma);
    });
  }
  return out;
}

// Multi-class focal over softmax bins, mean over valid positions.
// logits: [nbins, P]; bins[i] in [0,nbins) or the sentinel -1 for positions
// that carry no target. All-sentinel input yields exactly 0.
template <typename T>
Tensor<T> softmax_focal(const Tensor<T>& logits,
                        const std::vector<int32_t>& bins, T alpha, T gamma) {
  check(logits.ndim() == 2, "softmax_focal: need [nbins, positions]");
  int nb = logits.dim(0);
  int64_t P = logits.dim(1);
  check(int64_t(bins.size()) == P, "softmax_focal: bin count mismatch");
  int64_t nvalid = 0;
  for (int32_t b : bins) {
    check(b >= -1 && b < nb, "softmax_focal: bin id out of range");
    if (b >= 0) ++nvalid;
  }
  Tensor<T> out = make_output<T>({1});
  const T* z = logits.data();
  T acc = 0;
  for (int64_t i = 0; i < P; ++i) {
    int32_t y = bins[size_t(i)];
    if (y < 0) continue;
    T m = z[i];
    for (int b = 1; b < nb; ++b) m = std::max(m, z[int64_t(b) * P + i]);
    T se = 0;
    for (int b = 0; b < nb; ++b) se += std::exp(z[int64_t(b) * P + i] - m);
    T lse = m + std::log(se);
    T logp = z[int64_t(y) * P + i] - lse;
    T p = std::exp(logp);
    T mod = gamma == T(0) ? T(1) : std::pow(T(1) - p, gamma);
    acc += -alpha * mod * logp;
  }
  out.data()[0] = nvalid > 0 ? acc / T(nvalid) : T(0);
  if (track_grad<T>({&logits}) && nvalid > 0) {
    auto ln = logits.node();
    auto bn = std::make_shared<std::vector<int32_t>>(bins);
    attach<T>(out, {logits}, [ln, bn, alpha, gamma, nb, P,
                              nvalid](Node<T>& o) {
      ln->ensure_grad();
      T gscale = o.grad[0] / T(nvalid);
      const T* z = ln->data.data();
      for (int64_t i = 0; i < P; ++i) {
        int32_t y = (*bn)[size_t(i)];
        if (y < 0) continue;
        T m = z[i];
        for (int b = 1; b < nb; ++b) m = std::max(m, z[int64_t(b) * P + i]);
        T se = 0;
        for (int b = 0; b < nb; ++b)
          se += std::exp(z[int64_t(b) * P + i] - m);
        T lse = m + std::log(se);
        T logp = z[int64_t(y) * P + i] - lse;
        T p = std::exp(logp);
        T q = T(1) - p;
        T mod = gamma == T(0) ? T(1) : std::pow(q, gamma);
        // dL/dz_b = -alpha*(d_by - p_b)*[(1-p)^g - g*p*(1-p)^(g-1)*ln p].
        // The 1/p from dL/dp cancels against dp/dz; keeping the product
        // form stays finite when p underflows (p*ln p -> 0, logp finite).
        T factor =
            mod - (gamma == T(0)
                       ? T(0)
                       : gamma * p * std::pow(q, gamma - T(1)) * logp);
        for (int b = 0; b < nb; ++b) {
          T pb = std::exp(z[int64_t(b) * P + i] - lse);
          T dz = -alpha * factor * ((b == y ? T(1) : T(0)) - pb);
          ln->grad[int64_t(b) * P + i] += gscale * dz;
        }
      }
    });
  }
  return out;
}

// Huber-style smooth L1 on d = pred - target:
//   |d| <  delta: 0.5*d^2/delta
//   |d| >= delta: |d| - 0.5*delta
template <typename T>
inline T smooth_l1_scalar(T d, T delta) {
  T ad = std::abs(d);
  return ad < delta ? T(0.5) * d * d / delta : ad - T(0.5) * delta;
}

template <typename T>
Tensor<T> masked_smooth_l1(const Tensor<T>& pred, const std::vector<T>& target,
                           const std::vector<T>& weights, T delta) {
  check(int64_t(target.size()) == pred.numel() &&
            int64_t(weights.size()) == pred.numel(),
        "masked_smooth_l1: target/weight length mismatch");
  check(delta > T(0), "masked_smooth_l1: delta must be positive");
  Tensor<T> out = make_output<T>({1});
  const T* p = pred.data();
  T acc = 0;
  for (int64_t i = 0, n = pred.numel(); i < n; ++i)
    if (weights[size_t(i)] != T(0))
      acc += weights[size_t(i)] *
             smooth_l1_scalar(p[i] - target[size_t(i)], delta);
  out.data()[0] = acc;
  if (track_grad<T>({&pred})) {
    auto pn = pred.node();
    auto tg = std::make_shared<std::vector<T>>(target);
    auto wt = std::make_shared<std::vector<T>>(weights);
    attach<T>(out, {pred}, [pn, tg, wt, delta](Node<T>& o) {
      pn->ensure_grad();
      T g = o.grad[0];
      for (size_t i = 0; i < pn->data.size(); ++i) {
        if ((*wt)[i] == T(0)) continue;
        T d = pn->data[i] - (*tg)[i];
        T gr = std::abs(d) < delta ? d / delta : (d > T(0) ? T(1) : T(-1));
        pn->grad[i] += g * (*wt)[i] * gr;
      }
    });
  }
  return out;
}

}  // namespace monomm
